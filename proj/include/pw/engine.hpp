#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "pw/classifier.hpp"
#include "pw/dataset.hpp"

namespace pw {

struct StochasticConfig {
  int batch_size = 256;
  int iterations = 1000;
  double step_size = 0.05;
};

struct PwConfig {
  ClassifierSpec classifier = default_logistic_spec();
  int replicates = 100;
  Normalization normalization = Normalization::Hajek;
  std::optional<StochasticConfig> stochastic;
  int threads = 0;  // 0 = hardware concurrency
};

struct ReplicateTrace {
  int replicate_index = 0;
  double in_sample_risk = 0.0;
  long clamp_count = 0;
  Eigen::VectorXd weights;  // odds-ratio weights on the original rows
};

// Permutation weighting: B double-bootstrap replicates, one classifier fit
// per replicate, odds-ratio weights evaluated on the original rows, averaged
// across replicates in replicate order. Deterministic given master_seed and
// independent of how replicates are scheduled.
WeightSet estimate_pw_weights(const Dataset& dataset, const PwConfig& config,
                              std::uint64_t master_seed,
                              std::vector<ReplicateTrace>* traces = nullptr);

// Single logistic model trained by mini-batch gradient steps; every batch
// pairs a fresh observed bootstrap batch with a fresh marginal-resampled
// batch.
WeightSet estimate_pw_weights_stochastic(const Dataset& dataset,
                                         const PwConfig& config,
                                         std::uint64_t master_seed);

// Runs fn(i) for i in [0, count) on up to `threads` workers; results must be
// written to index i so output is independent of scheduling.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace pw
