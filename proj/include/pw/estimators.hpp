#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pw/classifier.hpp"
#include "pw/dataset.hpp"
#include "pw/engine.hpp"

namespace pw {

struct BinaryMeans {
  double mean_control = 0.0;  // E[Y(0)]
  double mean_treated = 0.0;  // E[Y(1)]
  double ate = 0.0;
};

// Per-arm Hajek weighted means (weights renormalized within arm) and their
// difference.
BinaryMeans weighted_means_binary(const Dataset& dataset, const WeightSet& weights);

struct DoseResponseEstimate {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<bool> unstable;  // grid points with too little kernel mass
  std::string estimator_tag;
  double bandwidth = 0.0;
};

// Local-linear kernel regression of y on a, case weights = supplied weights x
// Gaussian kernel. Bandwidth std::nullopt = Silverman's rule on the weighted
// treatment distribution.
DoseResponseEstimate dose_response_curve(const Dataset& dataset,
                                         const WeightSet& weights,
                                         const std::vector<double>& grid,
                                         std::optional<double> bandwidth);

enum class OutcomeKind { LinearLS, BoostedRegression };

struct OutcomeModel {
  OutcomeKind kind = OutcomeKind::LinearLS;
  Eigen::VectorXd beta;  // LinearLS: [intercept, x..., a]
  BoostedRegressor booster;
  bool case_weighted = false;

  Eigen::VectorXd predict(const Eigen::MatrixXd& covariates,
                          const Eigen::VectorXd& treatment) const;
};

// Default boosted-regression hyperparameters for outcome models.
BoostParams outcome_boost_params();

OutcomeModel fit_outcome(const Dataset& dataset, OutcomeKind kind,
                         const WeightSet* case_weights, ReplicateSeed seed);

// Plug-in estimate: fit mu on (x, a) -> y, then average mu(x_i, a*) over the
// sample at each grid point.
DoseResponseEstimate direct_method(const Dataset& dataset,
                                   const OutcomeModel& model,
                                   const std::vector<double>& grid);

// Pseudo-outcomes (y_i - mu(x_i, a_i)) w_i + DM(a_i); binary: per-arm means,
// continuous: local-linear smooth on a.
DoseResponseEstimate doubly_robust(const Dataset& dataset,
                                   const OutcomeModel& model,
                                   const WeightSet& weights,
                                   const std::vector<double>& grid,
                                   std::optional<double> bandwidth);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Percentile interval across per-replicate weighted estimates (unconditional
// inference over the resampled target trials). Requires B >= 20.
Interval unconditional_bootstrap_interval(const Dataset& dataset,
                                          const PwConfig& config,
                                          const EstimandRequest& estimand,
                                          std::uint64_t master_seed,
                                          double level);

}  // namespace pw
