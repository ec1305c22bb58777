// Command-line entry point: weighting, estimation, balance diagnostics and
// simulation studies as batch subcommands with reproducible seeds.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pw/baselines.hpp"
#include "pw/dataset.hpp"
#include "pw/diagnostics.hpp"
#include "pw/engine.hpp"
#include "pw/estimators.hpp"
#include "pw/simulation.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

std::string default_output_dir() {
  const char* env = std::getenv("PW_OUTPUT_DIR");
  return env && *env ? env : ".";
}

// Shared dataset flags for the non-simulate subcommands.
struct DataArgs {
  std::string path;
  std::string treatment_column = "a";
  std::string outcome_column;
  std::vector<std::string> covariate_columns;
  std::string delimiter = ",";

  void attach(CLI::App* cmd, bool need_outcome) {
    cmd->add_option("--data", path, "input CSV/TSV file")->required();
    cmd->add_option("--treatment", treatment_column, "treatment column name");
    auto* oc = cmd->add_option("--outcome", outcome_column, "outcome column name");
    if (need_outcome) oc->required();
    cmd->add_option("--covariates", covariate_columns,
                    "covariate column names (comma separated)")
        ->required()
        ->delimiter(',');
    cmd->add_option("--delimiter", delimiter, "field delimiter (default ,)");
  }

  pw::Dataset load() const {
    if (delimiter.size() != 1)
      throw UsageError("--delimiter must be a single character");
    if (!std::ifstream(path).good())
      throw IoError("cannot read dataset file: " + path);
    pw::Schema schema;
    schema.treatment_column = treatment_column;
    if (!outcome_column.empty()) schema.outcome_column = outcome_column;
    schema.covariate_columns = covariate_columns;
    schema.delimiter = delimiter[0];
    return pw::load_dataset(path, schema);
  }

  std::string config_json() const {
    std::string cols;
    for (std::size_t i = 0; i < covariate_columns.size(); ++i)
      cols += std::string(i ? ", " : "") + "\"" + covariate_columns[i] + "\"";
    return "\"data\": \"" + path + "\", \"treatment\": \"" + treatment_column +
           "\", \"outcome\": \"" + outcome_column + "\", \"covariates\": [" +
           cols + "]";
  }
};

struct WeightArgs {
  std::string method = "pw";          // pw | ipsw | uniform
  std::string classifier = "logit";   // logit | boosting
  std::string loss = "log";           // log | exponential | squared
  bool gps = false;
  bool stabilized = true;
  int replicates = 100;
  std::string normalization = "hajek";  // hajek | none
  int threads = 0;
  bool stochastic = false;
  int batch_size = 256;
  int iterations = 1000;
  double step_size = 0.05;

  void attach(CLI::App* cmd) {
    cmd->add_option("--method", method, "pw | ipsw | uniform");
    cmd->add_option("--classifier", classifier, "logit | boosting");
    cmd->add_option("--loss", loss, "log | exponential | squared");
    cmd->add_flag("--gps", gps, "use the normal-linear GPS for --method ipsw");
    cmd->add_flag("!--no-stabilize", stabilized, "disable IPSW stabilization");
    cmd->add_option("--replicates", replicates, "bootstrap replicates B");
    cmd->add_option("--normalization", normalization, "hajek | none");
    cmd->add_option("--threads", threads, "worker cap, 0 = all cores");
    cmd->add_flag("--stochastic", stochastic,
                  "mini-batch logistic training instead of replicates");
    cmd->add_option("--batch-size", batch_size, "stochastic batch size");
    cmd->add_option("--iterations", iterations, "stochastic iterations");
    cmd->add_option("--step-size", step_size, "stochastic step size");
  }

  pw::ClassifierSpec classifier_spec() const {
    pw::ClassifierSpec spec = classifier == "boosting"
                                  ? pw::default_boosting_spec()
                                  : pw::default_logistic_spec();
    if (classifier != "logit" && classifier != "boosting")
      throw UsageError("unknown --classifier: " + classifier);
    if (loss == "log")
      spec.loss = pw::Loss::Log;
    else if (loss == "exponential")
      spec.loss = pw::Loss::Exponential;
    else if (loss == "squared")
      spec.loss = pw::Loss::Squared;
    else
      throw UsageError("unknown --loss: " + loss);
    return spec;
  }

  pw::PwConfig pw_config() const {
    pw::PwConfig config;
    config.classifier = classifier_spec();
    config.replicates = replicates;
    if (normalization == "hajek")
      config.normalization = pw::Normalization::Hajek;
    else if (normalization == "none")
      config.normalization = pw::Normalization::None;
    else
      throw UsageError("unknown --normalization: " + normalization);
    config.threads = threads;
    if (stochastic)
      config.stochastic = pw::StochasticConfig{batch_size, iterations, step_size};
    return config;
  }

  std::string config_json() const {
    return "\"method\": \"" + method + "\", \"classifier\": \"" + classifier +
           "\", \"loss\": \"" + loss + "\", \"gps\": " +
           (gps ? "true" : "false") + ", \"replicates\": " +
           std::to_string(replicates) + ", \"normalization\": \"" +
           normalization + "\", \"threads\": " + std::to_string(threads) +
           ", \"stochastic\": " + (stochastic ? "true" : "false");
  }
};

pw::WeightSet compute_weights(const pw::Dataset& ds, const WeightArgs& args,
                              std::uint64_t seed) {
  if (args.method == "uniform") {
    pw::WeightSet ws;
    ws.weights = Eigen::VectorXd::Ones(ds.n());
    ws.method_tag = "uniform";
    return ws;
  }
  if (args.method == "ipsw") {
    if (ds.treatment_kind == pw::TreatmentKind::Continuous && !args.gps)
      throw UsageError(
          "--method ipsw needs a binary treatment; pass --gps for a "
          "continuous dose");
    const pw::PropensityKind kind =
        args.gps ? pw::PropensityKind::NormalLinearGPS
                 : (args.classifier == "boosting" ? pw::PropensityKind::BoostedPS
                                                  : pw::PropensityKind::LogisticPS);
    const pw::PropensityModel model = pw::fit_propensity(
        ds, kind, args.classifier_spec(), pw::ReplicateSeed{seed, 0});
    return pw::ipsw_weights(model, ds, args.stabilized);
  }
  if (args.method != "pw") throw UsageError("unknown --method: " + args.method);
  const pw::PwConfig config = args.pw_config();
  return config.stochastic
             ? pw::estimate_pw_weights_stochastic(ds, config, seed)
             : pw::estimate_pw_weights(ds, config, seed);
}

std::string report_header(const std::string& subcommand, std::uint64_t seed,
                          const std::string& config_json) {
  return "{\n  \"version\": \"" + std::string(kVersion) +
         "\",\n  \"subcommand\": \"" + subcommand +
         "\",\n  \"master_seed\": " + std::to_string(seed) +
         ",\n  \"config\": {" + config_json + "},\n";
}

int cmd_weight(const DataArgs& data_args, const WeightArgs& weight_args,
               std::uint64_t seed, const std::string& outdir) {
  const pw::Dataset ds = data_args.load();
  const pw::WeightSet ws = compute_weights(ds, weight_args, seed);

  pw::write_weights(outdir + "/weights.csv", ws);

  std::string json =
      report_header("weight", seed,
                    data_args.config_json() + ", " + weight_args.config_json());
  json += "  \"method_tag\": \"" + ws.method_tag + "\",\n";
  json += "  \"n\": " + std::to_string(ds.n()) + ",\n";
  json += "  \"replicates\": " + std::to_string(ws.replicates) + ",\n";
  json += "  \"clamp_count\": " + std::to_string(ws.clamp_count) + ",\n";
  json += "  \"weight_mean\": " + num(ws.weights.mean()) + ",\n";
  json += "  \"weight_min\": " + num(ws.weights.minCoeff()) + ",\n";
  json += "  \"weight_max\": " + num(ws.weights.maxCoeff()) + "\n}\n";
  write_file(outdir + "/weights.json", json);
  std::cout << "wrote " << outdir << "/weights.csv and weights.json\n";
  return kExitOk;
}

int cmd_estimate(const DataArgs& data_args, const WeightArgs& weight_args,
                 const std::string& estimand, const std::string& estimator,
                 const std::string& outcome_model, std::vector<double> grid,
                 double bandwidth, double interval_level, std::uint64_t seed,
                 const std::string& outdir) {
  const pw::Dataset ds = data_args.load();
  if (!ds.has_outcome()) throw UsageError("estimate requires --outcome");
  const pw::WeightSet ws = compute_weights(ds, weight_args, seed);

  const bool binary = ds.treatment_kind == pw::TreatmentKind::Binary;
  if (estimand == "dose-response" && binary)
    throw UsageError("dose-response estimand needs a continuous treatment");
  if ((estimand == "means" || estimand == "ate") && !binary)
    throw UsageError("binary estimand requested on a continuous treatment");
  if (estimand != "means" && estimand != "ate" && estimand != "dose-response")
    throw UsageError("unknown --estimand: " + estimand);

  if (grid.empty()) {
    if (binary) {
      grid = {0.0, 1.0};
    } else {
      const double lo = ds.treatment.minCoeff();
      const double hi = ds.treatment.maxCoeff();
      for (int g = 0; g < 25; ++g) grid.push_back(lo + (hi - lo) * g / 24.0);
    }
  }

  std::optional<double> bw;
  if (bandwidth > 0.0) bw = bandwidth;

  pw::OutcomeKind kind = outcome_model == "boosted"
                             ? pw::OutcomeKind::BoostedRegression
                             : pw::OutcomeKind::LinearLS;
  if (outcome_model != "linear" && outcome_model != "boosted")
    throw UsageError("unknown --outcome-model: " + outcome_model);

  std::vector<double> values;
  std::string estimator_tag;
  if (estimator == "weighting") {
    if (binary) {
      const pw::BinaryMeans means = pw::weighted_means_binary(ds, ws);
      values = estimand == "ate" ? std::vector<double>{means.ate}
                                 : std::vector<double>{means.mean_control,
                                                       means.mean_treated};
      if (estimand == "ate") grid = {1.0};
    } else {
      values = pw::dose_response_curve(ds, ws, grid, bw).values;
    }
    estimator_tag = "weighting";
  } else if (estimator == "dm" || estimator == "dr") {
    const pw::WeightSet* cw = weight_args.method == "uniform" ? nullptr : &ws;
    const pw::OutcomeModel model =
        pw::fit_outcome(ds, kind, cw, pw::ReplicateSeed{seed, 0});
    const pw::DoseResponseEstimate est =
        estimator == "dm" ? pw::direct_method(ds, model, grid)
                          : pw::doubly_robust(ds, model, ws, grid, bw);
    values = est.values;
    estimator_tag = est.estimator_tag;
    if (binary && estimand == "ate") {
      values = {values[1] - values[0]};
      grid = {1.0};
    }
  } else {
    throw UsageError("unknown --estimator: " + estimator);
  }

  std::string csv = "grid,value\n";
  for (std::size_t g = 0; g < grid.size(); ++g)
    csv += num(grid[g]) + "," + num(values[g]) + "\n";
  write_file(outdir + "/estimate.csv", csv);

  std::string json = report_header(
      "estimate", seed,
      data_args.config_json() + ", " + weight_args.config_json() +
          ", \"estimand\": \"" + estimand + "\", \"estimator\": \"" +
          estimator + "\", \"outcome_model\": \"" + outcome_model + "\"");
  json += "  \"estimator_tag\": \"" + estimator_tag + "\",\n";
  json += "  \"grid\": [";
  for (std::size_t g = 0; g < grid.size(); ++g)
    json += std::string(g ? ", " : "") + num(grid[g]);
  json += "],\n  \"values\": [";
  for (std::size_t g = 0; g < values.size(); ++g)
    json += std::string(g ? ", " : "") + num(values[g]);
  json += "]";

  if (interval_level > 0.0) {
    if (weight_args.method != "pw" || weight_args.stochastic)
      throw UsageError("--interval requires --method pw without --stochastic");
    pw::EstimandRequest request;
    request.kind = estimand == "ate" ? pw::EstimandKind::ATE
                                     : (binary ? pw::EstimandKind::BinaryMeans
                                               : pw::EstimandKind::DoseResponseCurve);
    request.grid = grid;
    const pw::Interval ci = pw::unconditional_bootstrap_interval(
        ds, weight_args.pw_config(), request, seed, interval_level);
    json += ",\n  \"interval_level\": " + num(interval_level);
    json += ",\n  \"interval\": [" + num(ci.lower) + ", " + num(ci.upper) + "]";
  }
  json += "\n}\n";
  write_file(outdir + "/estimate.json", json);
  std::cout << "wrote " << outdir << "/estimate.csv and estimate.json\n";
  return kExitOk;
}

int cmd_balance(const DataArgs& data_args, const std::string& weights_path,
                const std::string& basis_name, std::uint64_t seed,
                const std::string& outdir) {
  const pw::Dataset ds = data_args.load();
  pw::WeightSet ws;
  if (weights_path.empty()) {
    ws.weights = Eigen::VectorXd::Ones(ds.n());
    ws.method_tag = "uniform";
  } else {
    ws.weights = pw::read_weights(weights_path);
    ws.method_tag = "file:" + weights_path;
    if (ws.weights.size() != ds.n())
      throw UsageError("weights file length " +
                       std::to_string(ws.weights.size()) +
                       " does not match dataset n=" + std::to_string(ds.n()));
  }

  pw::BalanceBasis basis = pw::BalanceBasis::Linear;
  if (basis_name == "quadratic")
    basis = pw::BalanceBasis::Quadratic;
  else if (basis_name == "pairwise")
    basis = pw::BalanceBasis::PairwiseProducts;
  else if (basis_name != "linear")
    throw UsageError("unknown --basis: " + basis_name);

  const pw::BalanceReport report = pw::functional_discrepancy(ds, ws, basis);

  std::string csv = "basis_id,unweighted,weighted,target,discrepancy\n";
  for (const auto& row : report.rows)
    csv += row.basis_id + "," + num(row.unweighted) + "," + num(row.weighted) +
           "," + num(row.target) + "," + num(row.discrepancy) + "\n";
  write_file(outdir + "/balance.csv", csv);

  std::string json = report_header(
      "balance", seed,
      data_args.config_json() + ", \"weights\": \"" + weights_path +
          "\", \"basis\": \"" + basis_name + "\"");
  json += "  \"rows\": " + std::to_string(report.rows.size()) + ",\n";
  json += "  \"max_discrepancy\": " + num(report.max_discrepancy) + ",\n";
  json += "  \"mean_discrepancy\": " + num(report.mean_discrepancy) + "\n}\n";
  write_file(outdir + "/balance.json", json);
  std::cout << "wrote " << outdir << "/balance.csv and balance.json\n";
  return kExitOk;
}

pw::WeightMethod parse_method(const std::string& name) {
  if (name == "unweighted") return pw::WeightMethod::Unweighted;
  if (name == "ps" || name == "ps-logit") return pw::WeightMethod::PsLogit;
  if (name == "ps-boosting" || name == "boosted-ps")
    return pw::WeightMethod::PsBoosting;
  if (name == "gps") return pw::WeightMethod::Gps;
  if (name == "pw-glm" || name == "pw-logit") return pw::WeightMethod::PwLogit;
  if (name == "pw-boosting") return pw::WeightMethod::PwBoosting;
  if (name == "oracle") return pw::WeightMethod::OracleWeights;
  throw UsageError("unknown method: " + name);
}

pw::SimEstimator parse_estimator(const std::string& name) {
  if (name == "model-free") return pw::SimEstimator::ModelFree;
  if (name == "dm") return pw::SimEstimator::DirectMethod;
  if (name == "dr") return pw::SimEstimator::DoublyRobust;
  throw UsageError("unknown estimator: " + name);
}

int cmd_simulate(const std::string& dgp_name, bool misspecified, int n,
                 int sims, const std::vector<std::string>& method_names,
                 const std::vector<std::string>& estimator_names,
                 int pw_replicates, int trees, int depth, int threads,
                 std::uint64_t seed, const std::string& outdir) {
  pw::DgpSpec dgp;
  if (dgp_name == "ks-binary")
    dgp.kind = pw::DgpKind::KsBinary;
  else if (dgp_name == "ks-continuous")
    dgp.kind = pw::DgpKind::KsContinuous;
  else
    throw UsageError("unknown --dgp: " + dgp_name);
  dgp.misspecified = misspecified;
  dgp.n = n;

  std::vector<pw::WeightMethod> methods;
  for (const auto& name : method_names) methods.push_back(parse_method(name));
  std::vector<pw::SimEstimator> estimators;
  for (const auto& name : estimator_names)
    estimators.push_back(parse_estimator(name));

  pw::SimTuning tuning;
  tuning.pw_replicates = pw_replicates;
  tuning.pw_boost.num_trees = trees;
  tuning.pw_boost.max_depth = depth;
  tuning.threads = threads;

  const pw::SimulationReport report =
      pw::run_experiment(dgp, methods, estimators, sims, seed, tuning);

  std::string csv = "method,estimator,abs_bias,bias_se,irmse,irmse_se\n";
  for (const auto& row : report.rows)
    csv += row.method_tag + "," + row.estimator_tag + "," + num(row.bias) +
           "," + num(row.bias_se) + "," + num(row.irmse) + "," +
           num(row.irmse_se) + "\n";
  write_file(outdir + "/simulation.csv", csv);

  std::string curves = "method,estimator,grid,marginal_weight,mean_estimate,mean_truth\n";
  for (std::size_t r = 0; r < report.rows.size(); ++r)
    for (std::size_t g = 0; g < report.grid.size(); ++g)
      curves += report.rows[r].method_tag + "," + report.rows[r].estimator_tag +
                "," + num(report.grid[g]) + "," +
                num(report.marginal_weights[g]) + "," +
                num(report.mean_curves[r][g]) + "," +
                num(report.mean_truth[g]) + "\n";
  write_file(outdir + "/simulation_curves.csv", curves);

  std::string json = report_header(
      "simulate", seed,
      "\"dgp\": \"" + dgp_name + "\", \"misspecified\": " +
          (misspecified ? "true" : "false") + ", \"n\": " + std::to_string(n) +
          ", \"sims\": " + std::to_string(sims) + ", \"pw_replicates\": " +
          std::to_string(pw_replicates) + ", \"trees\": " +
          std::to_string(trees) + ", \"depth\": " + std::to_string(depth) +
          ", \"threads\": " + std::to_string(threads));
  json += "  \"report\": " + report.to_json() + "}\n";
  write_file(outdir + "/simulation.json", json);

  std::cout << report.to_table();
  std::cout << "wrote " << outdir
            << "/simulation.csv, simulation_curves.csv, simulation.json\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"permutation weighting toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string outdir = default_output_dir();
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--out", outdir, "output directory (default $PW_OUTPUT_DIR or .)");

  // weight
  auto* weight = app.add_subcommand("weight", "estimate balancing weights");
  DataArgs weight_data;
  weight_data.attach(weight, /*need_outcome=*/false);
  WeightArgs weight_args;
  weight_args.attach(weight);

  // estimate
  auto* estimate = app.add_subcommand("estimate", "weighted effect estimates");
  DataArgs estimate_data;
  estimate_data.attach(estimate, /*need_outcome=*/true);
  WeightArgs estimate_weight_args;
  estimate_weight_args.attach(estimate);
  std::string estimand = "ate";
  std::string estimator = "weighting";
  std::string outcome_model = "linear";
  std::vector<double> grid;
  double bandwidth = 0.0;
  double interval_level = 0.0;
  estimate->add_option("--estimand", estimand, "means | ate | dose-response");
  estimate->add_option("--estimator", estimator, "weighting | dm | dr");
  estimate->add_option("--outcome-model", outcome_model, "linear | boosted");
  estimate->add_option("--grid", grid, "dose grid (comma separated)")
      ->delimiter(',');
  estimate->add_option("--bandwidth", bandwidth, "kernel bandwidth (0 = auto)");
  estimate->add_option("--interval", interval_level,
                       "bootstrap interval level, e.g. 0.95 (0 = off)");

  // balance
  auto* balance = app.add_subcommand("balance", "functional balance report");
  DataArgs balance_data;
  balance_data.attach(balance, /*need_outcome=*/false);
  std::string weights_path;
  std::string basis_name = "linear";
  balance->add_option("--weights", weights_path,
                      "weights CSV from `weight` (omit for uniform)");
  balance->add_option("--basis", basis_name, "linear | quadratic | pairwise");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study");
  std::string dgp_name = "ks-binary";
  bool misspecified = false;
  int n = 2000;
  int sims = 100;
  std::vector<std::string> method_names = {"unweighted", "ps", "pw-glm",
                                           "pw-boosting"};
  std::vector<std::string> estimator_names = {"model-free"};
  int pw_replicates = 100;
  int trees = 50;
  int depth = 2;
  int threads = 0;
  simulate->add_option("--dgp", dgp_name, "ks-binary | ks-continuous");
  simulate->add_flag("--misspecified", misspecified,
                     "observe transformed covariates");
  simulate->add_option("--n", n, "units per simulated dataset");
  simulate->add_option("--sims", sims, "number of simulated datasets");
  simulate->add_option("--methods", method_names,
                       "weighting methods (comma separated)")
      ->delimiter(',');
  simulate->add_option("--estimators", estimator_names,
                       "model-free | dm | dr (comma separated)")
      ->delimiter(',');
  simulate->add_option("--pw-replicates", pw_replicates,
                       "bootstrap replicates per PW fit");
  simulate->add_option("--trees", trees, "boosting trees in the sweep");
  simulate->add_option("--depth", depth, "boosting tree depth in the sweep");
  simulate->add_option("--threads", threads, "worker cap, 0 = all cores");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!std::filesystem::is_directory(outdir))
      throw IoError("output directory does not exist: " + outdir);
    if (weight->parsed())
      return cmd_weight(weight_data, weight_args, seed, outdir);
    if (estimate->parsed())
      return cmd_estimate(estimate_data, estimate_weight_args, estimand,
                          estimator, outcome_model, grid, bandwidth,
                          interval_level, seed, outdir);
    if (balance->parsed())
      return cmd_balance(balance_data, weights_path, basis_name, seed, outdir);
    if (simulate->parsed())
      return cmd_simulate(dgp_name, misspecified, n, sims, method_names,
                          estimator_names, pw_replicates, trees, depth, threads,
                          seed, outdir);
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pw::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
