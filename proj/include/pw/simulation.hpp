#pragma once

#include <string>
#include <vector>

#include "pw/baselines.hpp"
#include "pw/dataset.hpp"
#include "pw/engine.hpp"
#include "pw/estimators.hpp"

namespace pw {

enum class DgpKind { KsBinary, KsContinuous };

struct DgpSpec {
  DgpKind kind = DgpKind::KsBinary;
  bool misspecified = false;
  int n = 2000;
  std::uint64_t seed = 0;
};

// Ground truth carried alongside a simulated draw. true_weights are the
// balancing weights p(a)p(x)/p(a,x) computed from the generating model.
struct DgpOracle {
  DgpKind kind = DgpKind::KsBinary;
  Eigen::VectorXd true_weights;
  Eigen::VectorXd true_propensity;  // binary: p(A=1|x); continuous: p(a|x)
  double covariate_effect_mean = 0.0;

  // per-simulation truth E_s[Y(a)], conditional on the drawn covariates
  double theta(double a) const;
};

std::pair<Dataset, DgpOracle> draw_dgp(const DgpSpec& spec);

// Covariate basis used by the harness's logistic permutation weighting:
// standardized, winsorized covariates plus their squares and pairwise
// products. Treatment and outcome are carried over unchanged.
Dataset quadratic_basis(const Dataset& dataset);

// Sum over grid of marginal_weight_g * sqrt(mean_s squared error).
double irmse(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& truths,
             const Eigen::VectorXd& marginal_weights);

// Sum over grid of marginal_weight_g * |mean_s error|.
double integrated_abs_bias(const Eigen::MatrixXd& estimates,
                           const Eigen::MatrixXd& truths,
                           const Eigen::VectorXd& marginal_weights);

enum class WeightMethod {
  Unweighted,
  PsLogit,
  PsBoosting,
  Gps,
  PwLogit,
  PwBoosting,
  OracleWeights,
};

enum class SimEstimator { ModelFree, DirectMethod, DoublyRobust };

const char* weight_method_name(WeightMethod m);
const char* sim_estimator_name(SimEstimator e);

// Knobs for the desk-scale harness; replicate counts and tree sizes trade
// fidelity for runtime.
struct SimTuning {
  int pw_replicates = 100;
  BoostParams pw_boost{300, 2, 0.2, 100, 0.5};
  Loss boost_loss = Loss::Log;
  BoostParams ps_boost{15, 2, 0.1, 10, 1.0};
  LogisticParams pw_logistic{0.0, 50, 1e-9};
  OutcomeKind outcome_model = OutcomeKind::LinearLS;
  int threads = 0;
};

struct SimulationRow {
  std::string method_tag;
  std::string estimator_tag;
  double bias = 0.0;
  double bias_se = 0.0;
  double irmse = 0.0;
  double irmse_se = 0.0;
};

struct SimulationReport {
  std::string dgp_tag;
  int n = 0;
  int simulations = 0;
  std::uint64_t master_seed = 0;
  std::vector<double> grid;
  std::vector<double> marginal_weights;
  std::vector<SimulationRow> rows;
  // per-grid-point mean estimates per row, for plotting
  std::vector<std::vector<double>> mean_curves;
  std::vector<double> mean_truth;

  std::string to_table() const;
  std::string to_json() const;
};

SimulationReport run_experiment(const DgpSpec& dgp,
                                const std::vector<WeightMethod>& methods,
                                const std::vector<SimEstimator>& estimators,
                                int simulations, std::uint64_t master_seed,
                                const SimTuning& tuning = SimTuning{});

}  // namespace pw
