#pragma once

#include "pw/classifier.hpp"
#include "pw/dataset.hpp"

namespace pw {

enum class PropensityKind { LogisticPS, BoostedPS, NormalLinearGPS };

// Propensity model of a on x (no interaction features; treatment is the
// label, not an input).
struct PropensityModel {
  PropensityKind kind = PropensityKind::LogisticPS;
  ProbabilisticClassifier classifier;  // LogisticPS / BoostedPS
  // NormalLinearGPS: a = [1 x]'beta + N(0, residual_sd^2), plus a normal fit
  // to the marginal of a
  Eigen::VectorXd beta;
  double residual_sd = 1.0;
  double marginal_mean = 0.0;
  double marginal_sd = 1.0;

  // binary kinds: p(A=1 | x), clamped
  Eigen::VectorXd predict_treated_probability(const Eigen::MatrixXd& covariates,
                                              long* clamp_count = nullptr) const;
};

PropensityModel fit_propensity(const Dataset& dataset, PropensityKind kind,
                               const ClassifierSpec& spec, ReplicateSeed seed);

// Binary: w = 1/p(a_i|x_i), stabilized multiplies by the empirical arm share.
// Continuous (always stabilized): w = phi(a; marginal) / phi(a; conditional).
WeightSet ipsw_weights(const PropensityModel& model, const Dataset& dataset,
                       bool stabilized);

}  // namespace pw
