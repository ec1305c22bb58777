#include "pw/engine.hpp"

#include <atomic>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "pw/resampling.hpp"

namespace pw {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0)
    threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace {

ReplicateTrace run_replicate(const Dataset& dataset, const PwConfig& config,
                             const Eigen::MatrixXd& eval_features,
                             ReplicateSeed seed, int replicate_index) {
  auto observed = bootstrap_observed(dataset, seed);
  auto pseudo = resample_marginals(dataset, seed);
  LabeledPairSet training = build_training_set(observed, pseudo, dataset);
  ProbabilisticClassifier model = fit(config.classifier, training, seed);

  ReplicateTrace trace;
  trace.replicate_index = replicate_index;
  trace.in_sample_risk = model.final_risk;
  Eigen::VectorXd probs = model.predict_proba(eval_features, &trace.clamp_count);
  trace.weights = (probs.array() / (1.0 - probs.array())).matrix();
  for (Eigen::Index i = 0; i < trace.weights.size(); ++i)
    if (!std::isfinite(trace.weights[i]) || trace.weights[i] < 0.0)
      throw std::runtime_error("non-finite replicate weight");
  return trace;
}

}  // namespace

WeightSet estimate_pw_weights(const Dataset& dataset, const PwConfig& config,
                              std::uint64_t master_seed,
                              std::vector<ReplicateTrace>* traces) {
  require_valid(dataset);
  if (config.replicates < 1)
    throw std::invalid_argument("estimate_pw_weights: replicates must be >= 1");

  const Eigen::MatrixXd eval_features = interaction_features(dataset);
  const int B = config.replicates;
  std::vector<ReplicateTrace> results(B);

  parallel_for(B, config.threads, [&](int b) {
    const ReplicateSeed seed{master_seed, static_cast<std::uint32_t>(b)};
    try {
      results[b] = run_replicate(dataset, config, eval_features, seed, b);
    } catch (const std::exception&) {
      // one retry with a derived seed; bootstrap degeneracy is seed-dependent
      const ReplicateSeed retry{Rng(seed, purpose::kRetry).next_u64(),
                                static_cast<std::uint32_t>(b)};
      try {
        results[b] = run_replicate(dataset, config, eval_features, retry, b);
      } catch (const std::exception& e) {
        throw std::runtime_error("replicate " + std::to_string(b) +
                                 " failed after retry: " + e.what());
      }
    }
  });

  // fixed-order reduction by replicate index
  WeightSet ws;
  ws.weights = Eigen::VectorXd::Zero(dataset.n());
  for (int b = 0; b < B; ++b) {
    ws.weights += results[b].weights;
    ws.clamp_count += results[b].clamp_count;
  }
  ws.weights /= static_cast<double>(B);
  ws.replicates = B;
  ws.method_tag = config.classifier.family == Family::LogisticInteraction
                      ? "pw-logit"
                      : "pw-boosting";
  if (config.normalization == Normalization::Hajek) ws = hajek_normalize(ws);
  if (traces) *traces = std::move(results);
  return ws;
}

WeightSet estimate_pw_weights_stochastic(const Dataset& dataset,
                                         const PwConfig& config,
                                         std::uint64_t master_seed) {
  require_valid(dataset);
  if (!config.stochastic)
    throw std::invalid_argument("stochastic config missing");
  if (config.classifier.family != Family::LogisticInteraction)
    throw std::invalid_argument(
        "stochastic training supports LogisticInteraction only");
  const StochasticConfig& sc = *config.stochastic;
  if (sc.iterations < 1 || sc.batch_size < 1)
    throw std::invalid_argument("stochastic config invalid");

  const Eigen::Index n = dataset.n(), d = dataset.d();
  const Eigen::Index p = 2 * d + 2;  // intercept + [x, a, a*x]
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Rng rng({master_seed, 0}, purpose::kStochastic);

  Eigen::RowVectorXd features(p - 1);
  for (int it = 0; it < sc.iterations; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    // observed half of the batch, label 0
    for (int b = 0; b < sc.batch_size; ++b) {
      const auto i = static_cast<Eigen::Index>(rng.uniform_below(n));
      features = interaction_row(dataset.covariates.row(i), dataset.treatment[i]);
      const double eta = beta[0] + features.dot(beta.tail(p - 1));
      const double resid = 0.0 - sigmoid(eta);
      grad[0] += resid;
      grad.tail(p - 1) += resid * features.transpose();
    }
    // marginal-resampled half, label 1
    for (int b = 0; b < sc.batch_size; ++b) {
      const auto ia = static_cast<Eigen::Index>(rng.uniform_below(n));
      const auto ix = static_cast<Eigen::Index>(rng.uniform_below(n));
      features = interaction_row(dataset.covariates.row(ix), dataset.treatment[ia]);
      const double eta = beta[0] + features.dot(beta.tail(p - 1));
      const double resid = 1.0 - sigmoid(eta);
      grad[0] += resid;
      grad.tail(p - 1) += resid * features.transpose();
    }
    beta += (sc.step_size / (2.0 * sc.batch_size)) * grad;
  }

  ProbabilisticClassifier model;
  model.family = Family::LogisticInteraction;
  model.loss = Loss::Log;
  model.coefficients = beta;

  WeightSet ws;
  ws.clamp_count = 0;
  Eigen::VectorXd probs =
      model.predict_proba(interaction_features(dataset), &ws.clamp_count);
  ws.weights = (probs.array() / (1.0 - probs.array())).matrix();
  ws.replicates = 1;
  ws.method_tag = "pw-logit-stochastic";
  if (config.normalization == Normalization::Hajek) ws = hajek_normalize(ws);
  return ws;
}

}  // namespace pw
