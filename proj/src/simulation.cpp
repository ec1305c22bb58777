#include "pw/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "pw/rng.hpp"

namespace pw {

namespace {

constexpr double kPi = 3.14159265358979323846;

double normal_pdf(double value, double mean, double sd) {
  const double z = (value - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * kPi));
}

double expit(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Kang-Schafer covariate transforms: the analyst observes these instead of
// the raw draws that generated treatment and outcome.
Eigen::MatrixXd ks_transform(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double x1 = x(i, 0), x2 = x(i, 1), x3 = x(i, 2), x4 = x(i, 3);
    out(i, 0) = std::exp(x1 / 2.0);
    out(i, 1) = x2 / (1.0 + std::exp(x1)) + 10.0;
    out(i, 2) = std::pow(x1 * x3 / 25.0 + 0.6, 3.0);
    out(i, 3) = std::pow(x2 + x4 + 20.0, 2.0);
  }
  return out;
}

// quantile with linear interpolation on sorted data
double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty vector");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

double DgpOracle::theta(double a) const {
  // Continuous: the covariate effect has zero population mean, so the
  // dose-response function is available in closed form.
  if (kind == DgpKind::KsContinuous) return 210.0 + expit(a);
  return 210.0 + a + covariate_effect_mean;
}

std::pair<Dataset, DgpOracle> draw_dgp(const DgpSpec& spec) {
  if (spec.n < 50) throw std::invalid_argument("draw_dgp: n must be >= 50");
  const int n = spec.n;
  Rng rng(ReplicateSeed{spec.seed, 0}, purpose::kDgp);

  Eigen::MatrixXd x(n, 4);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();

  Dataset ds;
  DgpOracle oracle;
  oracle.kind = spec.kind;
  ds.treatment.resize(n);
  ds.outcome.resize(n);
  oracle.true_weights.resize(n);
  oracle.true_propensity.resize(n);

  // linear index driving both treatment assignment and confounding
  Eigen::VectorXd lin =
      x.col(0) - 0.5 * x.col(1) + 0.25 * x.col(2) + 0.1 * x.col(3);
  Eigen::VectorXd effect = 27.4 * x.col(0) + 13.7 * x.col(1) +
                           13.7 * x.col(2) + 13.7 * x.col(3);
  oracle.covariate_effect_mean = effect.mean();

  if (spec.kind == DgpKind::KsBinary) {
    ds.treatment_kind = TreatmentKind::Binary;
    for (int i = 0; i < n; ++i) {
      const double p1 = expit(-lin[i]);
      const double a = rng.uniform01() < p1 ? 1.0 : 0.0;
      ds.treatment[i] = a;
      oracle.true_propensity[i] = p1;
      // marginal P(A=1) is exactly 1/2 by symmetry of the index
      const double p_obs = a == 1.0 ? p1 : 1.0 - p1;
      oracle.true_weights[i] = 0.5 / p_obs;
      ds.outcome[i] = 210.0 + a + effect[i] + rng.normal();
    }
  } else {
    ds.treatment_kind = TreatmentKind::Continuous;
    // marginal of A: N(0, var(lin) + 1) with var(lin) = 1.3225
    const double marginal_sd = std::sqrt(2.3225);
    for (int i = 0; i < n; ++i) {
      const double a = lin[i] + rng.normal();
      ds.treatment[i] = a;
      const double cond = normal_pdf(a, lin[i], 1.0);
      oracle.true_propensity[i] = cond;
      oracle.true_weights[i] = normal_pdf(a, 0.0, marginal_sd) / cond;
      ds.outcome[i] = 210.0 + expit(a) + effect[i] + rng.normal();
    }
  }

  ds.covariates = spec.misspecified ? ks_transform(x) : x;
  return {std::move(ds), std::move(oracle)};
}

namespace {

void check_metric_args(const Eigen::MatrixXd& estimates,
                       const Eigen::MatrixXd& truths,
                       const Eigen::VectorXd& marginal_weights) {
  if (estimates.rows() != truths.rows() || estimates.cols() != truths.cols())
    throw std::invalid_argument("metric: estimate/truth shape mismatch");
  if (marginal_weights.size() != estimates.cols())
    throw std::invalid_argument("metric: marginal weight length mismatch");
}

}  // namespace

double irmse(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& truths,
             const Eigen::VectorXd& marginal_weights) {
  check_metric_args(estimates, truths, marginal_weights);
  const Eigen::MatrixXd err = estimates - truths;
  double total = 0.0;
  for (Eigen::Index g = 0; g < err.cols(); ++g)
    total += marginal_weights[g] * std::sqrt(err.col(g).squaredNorm() /
                                             static_cast<double>(err.rows()));
  return total;
}

double integrated_abs_bias(const Eigen::MatrixXd& estimates,
                           const Eigen::MatrixXd& truths,
                           const Eigen::VectorXd& marginal_weights) {
  check_metric_args(estimates, truths, marginal_weights);
  const Eigen::MatrixXd err = estimates - truths;
  double total = 0.0;
  for (Eigen::Index g = 0; g < err.cols(); ++g)
    total += marginal_weights[g] * std::abs(err.col(g).mean());
  return total;
}

const char* weight_method_name(WeightMethod m) {
  switch (m) {
    case WeightMethod::Unweighted: return "unweighted";
    case WeightMethod::PsLogit: return "ps-logit";
    case WeightMethod::PsBoosting: return "ps-boosting";
    case WeightMethod::Gps: return "gps";
    case WeightMethod::PwLogit: return "pw-logit";
    case WeightMethod::PwBoosting: return "pw-boosting";
    case WeightMethod::OracleWeights: return "oracle-weights";
  }
  return "unknown";
}

const char* sim_estimator_name(SimEstimator e) {
  switch (e) {
    case SimEstimator::ModelFree: return "model-free";
    case SimEstimator::DirectMethod: return "direct-method";
    case SimEstimator::DoublyRobust: return "doubly-robust";
  }
  return "unknown";
}

namespace {

// Quadratic basis on standardized, winsorized covariates for the logistic
// permutation classifier. The clipping keeps the polynomial features from
// acquiring extreme leverage when the observed covariates are heavy-tailed,
// while leaving light-tailed data essentially untouched.
constexpr double kLogitWinsor = 3.5;

}  // namespace

Dataset quadratic_basis(const Dataset& ds) {
  const Eigen::Index n = ds.n();
  const Eigen::Index d = ds.d();
  Eigen::MatrixXd z = ds.covariates;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = z.col(j).mean();
    const double sd = std::sqrt((z.col(j).array() - mean).square().mean());
    z.col(j) = ((z.col(j).array() - mean) / (sd > 0.0 ? sd : 1.0))
                   .cwiseMin(kLogitWinsor)
                   .cwiseMax(-kLogitWinsor);
  }
  Dataset out = ds;
  out.covariates.resize(n, 2 * d + d * (d - 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j) out.covariates.col(k++) = z.col(j);
  for (Eigen::Index j = 0; j < d; ++j)
    out.covariates.col(k++) = z.col(j).array().square().matrix();
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index l = j + 1; l < d; ++l)
      out.covariates.col(k++) =
          (z.col(j).array() * z.col(l).array()).matrix();
  return out;
}

namespace {

WeightSet weights_for_method(WeightMethod method, const Dataset& ds,
                             const DgpOracle& oracle, const SimTuning& tuning,
                             std::uint64_t sim_seed) {
  WeightSet out;
  switch (method) {
    case WeightMethod::Unweighted: {
      out.weights = Eigen::VectorXd::Ones(ds.n());
      out.method_tag = "unweighted";
      return out;
    }
    case WeightMethod::OracleWeights: {
      out.weights = oracle.true_weights;
      out.method_tag = "oracle-weights";
      return out;
    }
    case WeightMethod::PsLogit:
    case WeightMethod::PsBoosting:
    case WeightMethod::Gps: {
      PropensityKind kind = method == WeightMethod::PsLogit
                                ? PropensityKind::LogisticPS
                                : method == WeightMethod::PsBoosting
                                      ? PropensityKind::BoostedPS
                                      : PropensityKind::NormalLinearGPS;
      ClassifierSpec spec = kind == PropensityKind::BoostedPS
                                ? default_boosting_spec()
                                : default_logistic_spec();
      spec.cv_folds = 0;  // no model selection inside the sweep
      spec.boost = kind == PropensityKind::BoostedPS ? tuning.ps_boost
                                                     : tuning.pw_boost;
      spec.logistic = tuning.pw_logistic;
      PropensityModel model =
          fit_propensity(ds, kind, spec, ReplicateSeed{sim_seed, 0});
      return ipsw_weights(model, ds, /*stabilized=*/true);
    }
    case WeightMethod::PwLogit:
    case WeightMethod::PwBoosting: {
      PwConfig config;
      config.classifier = method == WeightMethod::PwLogit
                              ? default_logistic_spec()
                              : default_boosting_spec();
      config.classifier.cv_folds = 0;
      config.classifier.boost = tuning.pw_boost;
      config.classifier.logistic = tuning.pw_logistic;
      if (method == WeightMethod::PwBoosting)
        config.classifier.loss = tuning.boost_loss;
      config.replicates = tuning.pw_replicates;
      config.normalization = Normalization::Hajek;
      config.threads = 1;  // outer loop owns the parallelism
      if (method == WeightMethod::PwLogit)
        return estimate_pw_weights(quadratic_basis(ds), config, sim_seed);
      return estimate_pw_weights(ds, config, sim_seed);
    }
  }
  throw std::invalid_argument("weights_for_method: unknown method");
}

Eigen::VectorXd evaluate_on_grid(SimEstimator estimator, const Dataset& ds,
                                 const WeightSet& weights,
                                 const std::vector<double>& grid,
                                 OutcomeKind outcome_kind,
                                 std::uint64_t sim_seed) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
  if (estimator == SimEstimator::ModelFree) {
    if (ds.treatment_kind == TreatmentKind::Binary) {
      const BinaryMeans means = weighted_means_binary(ds, weights);
      for (std::size_t g = 0; g < grid.size(); ++g)
        out[static_cast<Eigen::Index>(g)] =
            grid[g] == 0.0 ? means.mean_control : means.mean_treated;
    } else {
      const DoseResponseEstimate curve =
          dose_response_curve(ds, weights, grid, std::nullopt);
      for (std::size_t g = 0; g < grid.size(); ++g)
        out[static_cast<Eigen::Index>(g)] = curve.values[g];
    }
    return out;
  }

  const WeightSet* case_weights =
      weights.method_tag == "unweighted" ? nullptr : &weights;
  const OutcomeModel model =
      fit_outcome(ds, outcome_kind, case_weights, ReplicateSeed{sim_seed, 0});
  const DoseResponseEstimate curve =
      estimator == SimEstimator::DirectMethod
          ? direct_method(ds, model, grid)
          : doubly_robust(ds, model, weights, grid, std::nullopt);
  for (std::size_t g = 0; g < grid.size(); ++g)
    out[static_cast<Eigen::Index>(g)] = curve.values[g];
  return out;
}

double bootstrap_se(const std::function<double(const std::vector<int>&)>& stat,
                    int simulations, std::uint64_t master_seed) {
  constexpr int kResamples = 200;
  Rng rng(ReplicateSeed{master_seed, 0}, purpose::kBootstrapSe);
  std::vector<double> values(kResamples);
  std::vector<int> idx(simulations);
  for (int r = 0; r < kResamples; ++r) {
    for (int s = 0; s < simulations; ++s)
      idx[s] = static_cast<int>(rng.uniform_below(simulations));
    values[r] = stat(idx);
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= kResamples;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / (kResamples - 1));
}

}  // namespace

SimulationReport run_experiment(const DgpSpec& dgp,
                                const std::vector<WeightMethod>& methods,
                                const std::vector<SimEstimator>& estimators,
                                int simulations, std::uint64_t master_seed,
                                const SimTuning& tuning) {
  if (simulations < 2)
    throw std::invalid_argument("run_experiment: need at least 2 simulations");
  if (methods.empty() || estimators.empty())
    throw std::invalid_argument("run_experiment: empty method/estimator list");

  const int S = simulations;
  std::vector<Dataset> data(S);
  std::vector<DgpOracle> oracles(S);
  std::vector<std::uint64_t> sim_seeds(S);
  for (int s = 0; s < S; ++s) {
    Rng seeder(ReplicateSeed{master_seed, static_cast<std::uint32_t>(s)},
               purpose::kDgp);
    sim_seeds[s] = seeder.next_u64();
    DgpSpec draw_spec = dgp;
    draw_spec.seed = sim_seeds[s];
    auto drawn = draw_dgp(draw_spec);
    data[s] = std::move(drawn.first);
    oracles[s] = std::move(drawn.second);
  }

  // Evaluation grid and marginal dose weights, pooled across simulations.
  std::vector<double> grid;
  Eigen::VectorXd marginal_weights;
  if (dgp.kind == DgpKind::KsBinary) {
    grid = {0.0, 1.0};
    double treated_share = 0.0;
    for (const auto& ds : data) treated_share += ds.treatment.mean();
    treated_share /= S;
    marginal_weights.resize(2);
    marginal_weights << 1.0 - treated_share, treated_share;
  } else {
    std::vector<double> pooled;
    pooled.reserve(static_cast<std::size_t>(S) * dgp.n);
    for (const auto& ds : data)
      pooled.insert(pooled.end(), ds.treatment.data(),
                    ds.treatment.data() + ds.treatment.size());
    std::sort(pooled.begin(), pooled.end());
    const double lo = sorted_quantile(pooled, 0.05);
    const double hi = sorted_quantile(pooled, 0.95);
    constexpr int kGridPoints = 25;
    grid.resize(kGridPoints);
    for (int g = 0; g < kGridPoints; ++g)
      grid[g] = lo + (hi - lo) * g / (kGridPoints - 1);

    // Equal weights across the trimmed dose range. Equivalently, the dose
    // integral is taken uniformly over the middle 90% of the marginal; this
    // keeps the tails of the evaluation range from being down-weighted away.
    marginal_weights =
        Eigen::VectorXd::Constant(kGridPoints, 1.0 / kGridPoints);
  }
  const auto G = static_cast<Eigen::Index>(grid.size());

  // estimates[m][e] is S x G
  const int M = static_cast<int>(methods.size());
  const int E = static_cast<int>(estimators.size());
  std::vector<std::vector<Eigen::MatrixXd>> estimates(
      M, std::vector<Eigen::MatrixXd>(E, Eigen::MatrixXd(S, G)));
  Eigen::MatrixXd truths(S, G);
  for (int s = 0; s < S; ++s)
    for (Eigen::Index g = 0; g < G; ++g)
      truths(s, g) = oracles[s].theta(grid[static_cast<std::size_t>(g)]);

  parallel_for(S, tuning.threads, [&](int s) {
    for (int m = 0; m < M; ++m) {
      const WeightSet w = weights_for_method(methods[m], data[s], oracles[s],
                                             tuning, sim_seeds[s]);
      for (int e = 0; e < E; ++e)
        estimates[m][e].row(s) = evaluate_on_grid(estimators[e], data[s], w,
                                                  grid, tuning.outcome_model,
                                                  sim_seeds[s])
                                     .transpose();
    }
  });

  SimulationReport report;
  report.dgp_tag =
      std::string(dgp.kind == DgpKind::KsBinary ? "ks-binary" : "ks-continuous") +
      (dgp.misspecified ? "-misspecified" : "-wellspecified");
  report.n = dgp.n;
  report.simulations = S;
  report.master_seed = master_seed;
  report.grid = grid;
  report.marginal_weights.assign(marginal_weights.data(),
                                 marginal_weights.data() + G);
  report.mean_truth.resize(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g)
    report.mean_truth[static_cast<std::size_t>(g)] = truths.col(g).mean();

  for (int m = 0; m < M; ++m) {
    for (int e = 0; e < E; ++e) {
      const Eigen::MatrixXd& est = estimates[m][e];
      SimulationRow row;
      row.method_tag = weight_method_name(methods[m]);
      row.estimator_tag = sim_estimator_name(estimators[e]);
      row.irmse = irmse(est, truths, marginal_weights);
      row.bias = integrated_abs_bias(est, truths, marginal_weights);

      const auto resampled_metric = [&](bool want_irmse) {
        return [&, want_irmse](const std::vector<int>& idx) {
          Eigen::MatrixXd est_r(idx.size(), G), truth_r(idx.size(), G);
          for (std::size_t i = 0; i < idx.size(); ++i) {
            est_r.row(static_cast<Eigen::Index>(i)) = est.row(idx[i]);
            truth_r.row(static_cast<Eigen::Index>(i)) = truths.row(idx[i]);
          }
          return want_irmse
                     ? irmse(est_r, truth_r, marginal_weights)
                     : integrated_abs_bias(est_r, truth_r, marginal_weights);
        };
      };
      row.irmse_se = bootstrap_se(resampled_metric(true), S, master_seed);
      row.bias_se = bootstrap_se(resampled_metric(false), S, master_seed);

      report.rows.push_back(row);
      std::vector<double> curve(static_cast<std::size_t>(G));
      for (Eigen::Index g = 0; g < G; ++g)
        curve[static_cast<std::size_t>(g)] = est.col(g).mean();
      report.mean_curves.push_back(std::move(curve));
    }
  }
  return report;
}

std::string SimulationReport::to_table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "dgp=%s n=%d sims=%d seed=%llu\n",
                dgp_tag.c_str(), n, simulations,
                static_cast<unsigned long long>(master_seed));
  out += line;
  std::snprintf(line, sizeof(line), "%-16s %-14s %12s %10s %12s %10s\n",
                "method", "estimator", "abs_bias", "bias_se", "irmse",
                "irmse_se");
  out += line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%-16s %-14s %12.4f %10.4f %12.4f %10.4f\n",
                  row.method_tag.c_str(), row.estimator_tag.c_str(), row.bias,
                  row.bias_se, row.irmse, row.irmse_se);
    out += line;
  }
  return out;
}

std::string SimulationReport::to_json() const {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::string out = "{\n";
  out += "  \"dgp\": \"" + dgp_tag + "\",\n";
  out += "  \"n\": " + std::to_string(n) + ",\n";
  out += "  \"simulations\": " + std::to_string(simulations) + ",\n";
  out += "  \"master_seed\": " + std::to_string(master_seed) + ",\n";
  auto array = [&](const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
      s += (i ? ", " : "") + num(v[i]);
    return s + "]";
  };
  out += "  \"grid\": " + array(grid) + ",\n";
  out += "  \"marginal_weights\": " + array(marginal_weights) + ",\n";
  out += "  \"mean_truth\": " + array(mean_truth) + ",\n";
  out += "  \"rows\": [\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    out += "    {\"method\": \"" + row.method_tag + "\", \"estimator\": \"" +
           row.estimator_tag + "\", \"abs_bias\": " + num(row.bias) +
           ", \"bias_se\": " + num(row.bias_se) +
           ", \"irmse\": " + num(row.irmse) +
           ", \"irmse_se\": " + num(row.irmse_se) +
           ", \"mean_curve\": " + array(mean_curves[i]) + "}";
    out += i + 1 < rows.size() ? ",\n" : "\n";
  }
  out += "  ]\n}\n";
  return out;
}

}  // namespace pw
