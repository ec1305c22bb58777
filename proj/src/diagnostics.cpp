#include "pw/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "pw/resampling.hpp"

namespace pw {

namespace {

struct NamedColumn {
  std::string name;
  Eigen::VectorXd values;
};

std::vector<NamedColumn> treatment_basis(const Dataset& ds, BalanceBasis basis) {
  std::vector<NamedColumn> out;
  out.push_back({"a", ds.treatment});
  if (basis != BalanceBasis::Linear)
    out.push_back({"a^2", ds.treatment.array().square().matrix()});
  return out;
}

std::vector<NamedColumn> covariate_basis(const Dataset& ds, BalanceBasis basis) {
  std::vector<NamedColumn> out;
  for (Eigen::Index j = 0; j < ds.d(); ++j)
    out.push_back({"x" + std::to_string(j + 1), ds.covariates.col(j)});
  if (basis != BalanceBasis::Linear) {
    for (Eigen::Index j = 0; j < ds.d(); ++j)
      out.push_back({"x" + std::to_string(j + 1) + "^2",
                     ds.covariates.col(j).array().square().matrix()});
  }
  if (basis == BalanceBasis::PairwiseProducts) {
    for (Eigen::Index j = 0; j < ds.d(); ++j)
      for (Eigen::Index k = j + 1; k < ds.d(); ++k)
        out.push_back(
            {"x" + std::to_string(j + 1) + "*x" + std::to_string(k + 1),
             (ds.covariates.col(j).array() * ds.covariates.col(k).array())
                 .matrix()});
  }
  return out;
}

}  // namespace

BalanceReport functional_discrepancy(const Dataset& dataset,
                                     const WeightSet& weights,
                                     BalanceBasis basis) {
  if (weights.weights.size() != dataset.n())
    throw std::invalid_argument("functional_discrepancy: weight length mismatch");
  const auto n = static_cast<double>(dataset.n());

  // Hajek-normalize to mean 1 so the weighted term is a proper expectation
  Eigen::VectorXd w = weights.weights;
  const double wsum = w.sum();
  if (wsum > 0.0) w *= n / wsum;

  BalanceReport report;
  report.clamp_count = weights.clamp_count;
  for (const auto& phi : treatment_basis(dataset, basis)) {
    const double phi_mean = phi.values.mean();
    for (const auto& psi : covariate_basis(dataset, basis)) {
      BalanceRow row;
      row.basis_id = phi.name + "*" + psi.name;
      const Eigen::ArrayXd product = phi.values.array() * psi.values.array();
      row.unweighted = product.mean();
      row.weighted = (product * w.array()).mean();
      row.target = phi_mean * psi.values.mean();
      row.discrepancy = std::abs(row.weighted - row.target);
      report.rows.push_back(std::move(row));
    }
  }
  for (const auto& row : report.rows) {
    report.max_discrepancy = std::max(report.max_discrepancy, row.discrepancy);
    report.mean_discrepancy += row.discrepancy;
  }
  report.mean_discrepancy /= static_cast<double>(report.rows.size());
  return report;
}

Eigen::VectorXd score_condition_residual(const ProbabilisticClassifier& model,
                                         const LabeledPairSet& data) {
  if (model.family != Family::LogisticInteraction)
    throw std::invalid_argument(
        "score_condition_residual: logistic model required");
  const Eigen::VectorXd probs =
      model.decision_scores(data.features).unaryExpr([](double s) {
        return sigmoid(s);
      });
  const Eigen::VectorXd resid = data.labels.cast<double>() - probs;
  Eigen::VectorXd out(data.features.cols() + 1);
  out[0] = std::abs(resid.sum());
  out.tail(data.features.cols()) =
      (data.features.transpose() * resid).array().abs();
  return out;
}

BiasBound bias_bound_check(const Eigen::VectorXd& y,
                           const Eigen::VectorXd& true_weights,
                           const Eigen::VectorXd& estimated_weights) {
  if (y.size() != true_weights.size() || y.size() != estimated_weights.size())
    throw std::invalid_argument("bias_bound_check: length mismatch");
  BiasBound out;
  out.lhs = std::abs((y.array() * (estimated_weights - true_weights).array()).mean());
  out.rhs = (y.array().abs() *
             (estimated_weights - true_weights).array().abs())
                .mean();
  return out;
}

std::vector<RiskBalancePoint> balance_vs_risk_curve(
    const Dataset& dataset, const PwConfig& config,
    const std::vector<int>& capacity_levels, std::uint64_t master_seed) {
  require_valid(dataset);

  // a representative training set for the held-out risk column
  const ReplicateSeed probe{master_seed, 0};
  auto observed = bootstrap_observed(dataset, probe);
  auto pseudo = resample_marginals(dataset, probe);
  LabeledPairSet probe_set = build_training_set(observed, pseudo, dataset);

  std::vector<RiskBalancePoint> curve;
  for (const int capacity : capacity_levels) {
    RiskBalancePoint point;
    point.capacity = capacity;

    if (capacity == 0) {
      // intercept-only: constant weights, risk of the base-rate predictor
      const double p_bar = probe_set.labels.cast<double>().mean();
      point.held_out_risk = probability_risk(
          config.classifier.loss,
          Eigen::VectorXd::Constant(probe_set.labels.size(), p_bar),
          probe_set.labels);
      WeightSet uniform;
      uniform.weights = Eigen::VectorXd::Ones(dataset.n());
      uniform.method_tag = "intercept-only";
      point.linear_discrepancy =
          functional_discrepancy(dataset, uniform, BalanceBasis::Linear)
              .max_discrepancy;
      curve.push_back(point);
      continue;
    }

    PwConfig level_config = config;
    if (level_config.classifier.family == Family::LogisticInteraction)
      level_config.classifier.logistic.max_iterations = capacity;
    else
      level_config.classifier.boost.num_trees = capacity;
    level_config.classifier.cv_folds = 0;

    ClassifierSpec risk_spec = level_config.classifier;
    risk_spec.cv_folds = 2;
    point.held_out_risk = cv_risk(risk_spec, probe_set, probe);

    WeightSet ws = estimate_pw_weights(dataset, level_config, master_seed);
    point.linear_discrepancy =
        functional_discrepancy(dataset, ws, BalanceBasis::Linear)
            .max_discrepancy;
    curve.push_back(point);
  }
  return curve;
}

}  // namespace pw
