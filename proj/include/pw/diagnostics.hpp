#pragma once

#include <string>
#include <vector>

#include "pw/classifier.hpp"
#include "pw/dataset.hpp"
#include "pw/engine.hpp"

namespace pw {

enum class BalanceBasis { Linear, Quadratic, PairwiseProducts };

struct BalanceRow {
  std::string basis_id;       // e.g. "a*x2" or "a^2*x1^2"
  double unweighted = 0.0;    // (1/n) sum phi(a) psi(x)
  double weighted = 0.0;      // (1/n) sum phi(a) psi(x) w~
  double target = 0.0;        // mean(phi(a)) * mean(psi(x))
  double discrepancy = 0.0;   // |weighted - target|
};

struct BalanceReport {
  std::vector<BalanceRow> rows;
  double max_discrepancy = 0.0;
  double mean_discrepancy = 0.0;
  double classifier_risk = 0.0;  // optional, filled by balance_vs_risk_curve
  long clamp_count = 0;
};

// Discrepancy between the weighted expectation of phi(a)psi(x) and its value
// under the product of marginals. Weights are Hajek-normalized first.
BalanceReport functional_discrepancy(const Dataset& dataset,
                                     const WeightSet& weights,
                                     BalanceBasis basis);

// Per-feature |sum_i (c_i - p_i) f_i| including the intercept; zero at the
// unpenalized logistic optimum.
Eigen::VectorXd score_condition_residual(const ProbabilisticClassifier& model,
                                         const LabeledPairSet& data);

struct BiasBound {
  double lhs = 0.0;  // |mean(y w_hat) - mean(y w)|
  double rhs = 0.0;  // mean(|y| |w_hat - w|), total-variation instance
};

BiasBound bias_bound_check(const Eigen::VectorXd& y,
                           const Eigen::VectorXd& true_weights,
                           const Eigen::VectorXd& estimated_weights);

struct RiskBalancePoint {
  int capacity = 0;  // 0 = intercept-only
  double held_out_risk = 0.0;
  double linear_discrepancy = 0.0;
};

// Trains PW classifiers of increasing capacity (logistic: IRLS iterations,
// boosting: number of trees; 0 means intercept-only) and pairs held-out risk
// with the post-weighting linear discrepancy.
std::vector<RiskBalancePoint> balance_vs_risk_curve(
    const Dataset& dataset, const PwConfig& config,
    const std::vector<int>& capacity_levels, std::uint64_t master_seed);

}  // namespace pw
