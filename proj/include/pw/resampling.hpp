#pragma once

#include <vector>

#include "pw/dataset.hpp"
#include "pw/rng.hpp"

namespace pw {

// Concatenated classification training set: the observed bootstrap block
// (label 0) followed by the marginal-resampled block (label 1). Feature
// layout is [covariates x (d), treatment a (1), interaction a*x (d)].
struct LabeledPairSet {
  Eigen::MatrixXd features;  // m x (2d + 1)
  Eigen::VectorXi labels;    // m, values in {0, 1}
};

// A draw from the product of the observed marginals p(a)p(x). Covariate rows
// are kept intact; only the pairing with treatment is broken.
struct PseudoSample {
  Eigen::VectorXd treatment;
  std::vector<int> covariate_rows;  // indices into the source dataset
};

// n i.i.d. uniform with-replacement draws from 0..n-1.
std::vector<int> bootstrap_observed(const Dataset& dataset, ReplicateSeed seed);

PseudoSample resample_marginals(const Dataset& dataset, ReplicateSeed seed);

LabeledPairSet build_training_set(const std::vector<int>& observed_indices,
                                  const PseudoSample& pseudo,
                                  const Dataset& dataset);

// The [x, a, a*x] feature map for every original row of the dataset; this is
// the evaluation matrix the fitted classifier scores to produce weights.
Eigen::MatrixXd interaction_features(const Dataset& dataset);

Eigen::RowVectorXd interaction_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                   double a);

}  // namespace pw
