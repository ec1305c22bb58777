#include "pw/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pw {

namespace {

double weighted_quantile(std::vector<std::pair<double, double>> value_weight,
                         double q) {
  std::sort(value_weight.begin(), value_weight.end());
  double total = 0.0;
  for (const auto& vw : value_weight) total += vw.second;
  const double target = q * total;
  double cum = 0.0;
  for (const auto& vw : value_weight) {
    cum += vw.second;
    if (cum >= target) return vw.first;
  }
  return value_weight.back().first;
}

double silverman_bandwidth(const Eigen::VectorXd& a, const Eigen::VectorXd& w) {
  const double wsum = w.sum();
  const double mean = w.dot(a) / wsum;
  const double var = (w.array() * (a.array() - mean).square()).sum() / wsum;
  const double sd = std::sqrt(std::max(var, 0.0));
  std::vector<std::pair<double, double>> vw(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) vw[i] = {a[i], w[i]};
  const double iqr =
      weighted_quantile(vw, 0.75) - weighted_quantile(vw, 0.25);
  const double n_eff = wsum * wsum / w.squaredNorm();
  double spread = sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  double h = 0.9 * spread * std::pow(std::max(n_eff, 2.0), -0.2);
  if (!(h > 0.0)) {
    const double range = a.maxCoeff() - a.minCoeff();
    h = range > 0.0 ? range / 100.0 : 1.0;
  }
  return h;
}

// weighted local-linear fit at a*; returns intercept and the effective
// kernel sample size
std::pair<double, double> local_linear_at(const Eigen::VectorXd& a,
                                          const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& w,
                                          double center, double bandwidth) {
  double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0, u2 = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double t = a[i] - center;
    const double z = t / bandwidth;
    const double u = w[i] * std::exp(-0.5 * z * z);
    s0 += u;
    s1 += u * t;
    s2 += u * t * t;
    t0 += u * y[i];
    t1 += u * t * y[i];
    u2 += u * u;
  }
  const double n_eff = u2 > 0.0 ? s0 * s0 / u2 : 0.0;
  if (s0 <= 0.0) return {0.0, 0.0};
  const double det = s0 * s2 - s1 * s1;
  const double scale = s0 * s2;
  if (det <= 1e-12 * std::max(scale, 1e-300)) return {t0 / s0, n_eff};
  return {(s2 * t0 - s1 * t1) / det, n_eff};
}

}  // namespace

BinaryMeans weighted_means_binary(const Dataset& dataset, const WeightSet& ws) {
  if (dataset.treatment_kind != TreatmentKind::Binary)
    throw std::invalid_argument("weighted_means_binary: binary treatment required");
  if (!dataset.has_outcome())
    throw std::invalid_argument("weighted_means_binary: outcome required");
  if (ws.weights.size() != dataset.n())
    throw std::invalid_argument("weighted_means_binary: weight length mismatch");

  double num[2] = {0.0, 0.0}, den[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < dataset.n(); ++i) {
    const int arm = dataset.treatment[i] == 1.0 ? 1 : 0;
    num[arm] += ws.weights[i] * dataset.outcome[i];
    den[arm] += ws.weights[i];
  }
  if (den[0] <= 0.0 || den[1] <= 0.0)
    throw std::invalid_argument("weighted_means_binary: empty or zero-weight arm");
  BinaryMeans out;
  out.mean_control = num[0] / den[0];
  out.mean_treated = num[1] / den[1];
  out.ate = out.mean_treated - out.mean_control;
  return out;
}

DoseResponseEstimate dose_response_curve(const Dataset& dataset,
                                         const WeightSet& ws,
                                         const std::vector<double>& grid,
                                         std::optional<double> bandwidth) {
  if (dataset.treatment_kind != TreatmentKind::Continuous)
    throw std::invalid_argument("dose_response_curve: continuous treatment required");
  if (!dataset.has_outcome())
    throw std::invalid_argument("dose_response_curve: outcome required");
  if (grid.empty()) throw std::invalid_argument("dose_response_curve: empty grid");

  DoseResponseEstimate est;
  est.grid = grid;
  est.estimator_tag = "weighted-local-linear[" + ws.method_tag + "]";
  est.bandwidth = bandwidth ? *bandwidth
                            : silverman_bandwidth(dataset.treatment, ws.weights);
  for (const double a_star : grid) {
    auto [value, n_eff] = local_linear_at(dataset.treatment, dataset.outcome,
                                          ws.weights, a_star, est.bandwidth);
    est.values.push_back(value);
    est.unstable.push_back(n_eff < 10.0);
  }
  return est;
}

BoostParams outcome_boost_params() { return BoostParams{200, 3, 0.05, 10, 1.0}; }

Eigen::VectorXd OutcomeModel::predict(const Eigen::MatrixXd& covariates,
                                      const Eigen::VectorXd& treatment) const {
  const Eigen::Index n = covariates.rows(), d = covariates.cols();
  Eigen::MatrixXd features(n, d + 1);
  features.leftCols(d) = covariates;
  features.col(d) = treatment;
  if (kind == OutcomeKind::LinearLS) {
    if (beta.size() != d + 2)
      throw std::invalid_argument("OutcomeModel: width mismatch");
    return (features * beta.tail(d + 1)).array() + beta[0];
  }
  return booster.predict(features);
}

OutcomeModel fit_outcome(const Dataset& dataset, OutcomeKind kind,
                         const WeightSet* case_weights, ReplicateSeed seed) {
  if (!dataset.has_outcome())
    throw std::invalid_argument("fit_outcome: outcome required");
  const Eigen::Index n = dataset.n(), d = dataset.d();
  Eigen::VectorXd w = case_weights ? case_weights->weights
                                   : Eigen::VectorXd::Ones(n);
  if (w.size() != n) throw std::invalid_argument("fit_outcome: weight mismatch");

  OutcomeModel model;
  model.kind = kind;
  model.case_weighted = case_weights != nullptr;

  if (kind == OutcomeKind::LinearLS) {
    Eigen::MatrixXd design(n, d + 2);
    design.col(0).setOnes();
    design.middleCols(1, d) = dataset.covariates;
    design.col(d + 1) = dataset.treatment;
    const Eigen::MatrixXd wd = w.asDiagonal() * design;
    model.beta = (design.transpose() * wd)
                     .ldlt()
                     .solve(wd.transpose() * dataset.outcome);
    return model;
  }

  Eigen::MatrixXd features(n, d + 1);
  features.leftCols(d) = dataset.covariates;
  features.col(d) = dataset.treatment;
  model.booster = fit_boosted_regressor(features, dataset.outcome, w,
                                        outcome_boost_params(), seed);
  return model;
}

DoseResponseEstimate direct_method(const Dataset& dataset,
                                   const OutcomeModel& model,
                                   const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("direct_method: empty grid");
  DoseResponseEstimate est;
  est.grid = grid;
  est.estimator_tag = model.kind == OutcomeKind::LinearLS
                          ? "direct-method[ols]"
                          : "direct-method[boosted]";
  const Eigen::Index n = dataset.n();
  for (const double a_star : grid) {
    const Eigen::VectorXd mu =
        model.predict(dataset.covariates, Eigen::VectorXd::Constant(n, a_star));
    est.values.push_back(mu.mean());
    est.unstable.push_back(false);
  }
  return est;
}

DoseResponseEstimate doubly_robust(const Dataset& dataset,
                                   const OutcomeModel& model,
                                   const WeightSet& ws,
                                   const std::vector<double>& grid,
                                   std::optional<double> bandwidth) {
  if (ws.weights.size() != dataset.n())
    throw std::invalid_argument("doubly_robust: weight length mismatch");
  const Eigen::Index n = dataset.n();
  const Eigen::VectorXd mu_obs =
      model.predict(dataset.covariates, dataset.treatment);

  if (dataset.treatment_kind == TreatmentKind::Binary) {
    DoseResponseEstimate dm = direct_method(dataset, model, {0.0, 1.0});
    DoseResponseEstimate est;
    est.grid = {0.0, 1.0};
    est.estimator_tag = "doubly-robust[" + ws.method_tag + "]";
    double sum[2] = {0.0, 0.0};
    int count[2] = {0, 0};
    for (Eigen::Index i = 0; i < n; ++i) {
      const int arm = dataset.treatment[i] == 1.0 ? 1 : 0;
      sum[arm] += (dataset.outcome[i] - mu_obs[i]) * ws.weights[i];
      ++count[arm];
    }
    for (int arm = 0; arm <= 1; ++arm) {
      if (count[arm] == 0)
        throw std::invalid_argument("doubly_robust: empty arm");
      est.values.push_back(sum[arm] / count[arm] + dm.values[arm]);
      est.unstable.push_back(false);
    }
    return est;
  }

  // continuous: DM evaluated at each observed dose, then a local-linear
  // smooth of the pseudo-outcomes along a
  std::vector<double> observed_doses(dataset.treatment.data(),
                                     dataset.treatment.data() + n);
  DoseResponseEstimate dm_at_obs = direct_method(dataset, model, observed_doses);
  Eigen::VectorXd pseudo(n);
  for (Eigen::Index i = 0; i < n; ++i)
    pseudo[i] = (dataset.outcome[i] - mu_obs[i]) * ws.weights[i] +
                dm_at_obs.values[static_cast<std::size_t>(i)];

  DoseResponseEstimate est;
  est.grid = grid;
  est.estimator_tag = "doubly-robust[" + ws.method_tag + "]";
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(n);
  est.bandwidth =
      bandwidth ? *bandwidth : silverman_bandwidth(dataset.treatment, unit);
  for (const double a_star : grid) {
    auto [value, n_eff] = local_linear_at(dataset.treatment, pseudo, unit,
                                          a_star, est.bandwidth);
    est.values.push_back(value);
    est.unstable.push_back(n_eff < 10.0);
  }
  return est;
}

Interval unconditional_bootstrap_interval(const Dataset& dataset,
                                          const PwConfig& config,
                                          const EstimandRequest& estimand,
                                          std::uint64_t master_seed,
                                          double level) {
  if (config.replicates < 20)
    throw std::invalid_argument(
        "unconditional_bootstrap_interval: need at least 20 replicates");
  if (level <= 0.0 || level >= 1.0)
    throw std::invalid_argument("unconditional_bootstrap_interval: bad level");

  std::vector<ReplicateTrace> traces;
  estimate_pw_weights(dataset, config, master_seed, &traces);

  std::vector<double> estimates;
  estimates.reserve(traces.size());
  for (const auto& trace : traces) {
    WeightSet rw;
    rw.weights = trace.weights;
    rw.method_tag = "replicate";
    switch (estimand.kind) {
      case EstimandKind::BinaryMeans:
      case EstimandKind::ATE:
        estimates.push_back(weighted_means_binary(dataset, rw).ate);
        break;
      case EstimandKind::DoseResponseCurve: {
        if (estimand.grid.size() != 1)
          throw std::invalid_argument(
              "interval for dose-response needs a single grid point");
        auto curve =
            dose_response_curve(dataset, rw, estimand.grid, std::nullopt);
        estimates.push_back(curve.values[0]);
        break;
      }
    }
  }

  std::sort(estimates.begin(), estimates.end());
  auto quantile = [&](double q) {
    const double pos = q * (static_cast<double>(estimates.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, estimates.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return estimates[lo] * (1.0 - frac) + estimates[hi] * frac;
  };
  const double alpha = 1.0 - level;
  return Interval{quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

}  // namespace pw
