#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pw/resampling.hpp"
#include "pw/rng.hpp"

namespace pw {

// Probabilities are clipped into [kProbClamp, 1 - kProbClamp] before any odds
// ratio is formed, bounding individual weights at ~1e6.
constexpr double kProbClamp = 1e-6;

// Strictly proper scoring rules only; 0-1 loss is not admissible here.
enum class Loss { Log, Exponential, Squared };
enum class Family { LogisticInteraction, GradientBoostedTrees };

// Loss <-> divergence catalog. Queryable metadata: the Bregman divergence
// between estimated and true density ratio that training minimizes, and the
// f-divergence between the reweighted data and the balanced distribution.
struct LossDivergence {
  const char* bregman;
  const char* f_divergence;
};
LossDivergence loss_divergence(Loss loss);
const char* loss_name(Loss loss);

struct LogisticParams {
  double l2_penalty = 0.0;  // intercept never penalized
  int max_iterations = 100;
  double tolerance = 1e-9;  // on max |score residual| / m
};

struct BoostParams {
  int num_trees = 100;
  int max_depth = 2;
  double learning_rate = 0.1;
  int min_leaf_size = 10;
  double subsample_fraction = 1.0;
};

struct ClassifierSpec {
  Family family = Family::LogisticInteraction;
  Loss loss = Loss::Log;
  LogisticParams logistic;
  BoostParams boost;
  int cv_folds = 0;  // 0 disables cross-validated selection
  std::vector<LogisticParams> cv_grid_logistic;
  std::vector<BoostParams> cv_grid_boost;
};

// Default boosting setup: exponential-loss trees with a small depth x trees
// CV grid.
ClassifierSpec default_boosting_spec();
ClassifierSpec default_logistic_spec();

// --- pointwise loss primitives on the additive score scale ---------------
// Log: p = sigmoid(F). Exponential: p = sigmoid(2F). Squared: p = F.

inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double score_to_prob(Loss loss, double score) {
  switch (loss) {
    case Loss::Log: return sigmoid(score);
    case Loss::Exponential: return sigmoid(2.0 * score);
    case Loss::Squared: return score;
  }
  return 0.5;
}

inline double loss_value(Loss loss, double score, int label) {
  switch (loss) {
    case Loss::Log: {
      // log(1 + exp(-y F)) with y in {-1, 1}
      const double yf = (label == 1 ? score : -score);
      return yf > 0 ? std::log1p(std::exp(-yf)) : -yf + std::log1p(std::exp(yf));
    }
    case Loss::Exponential:
      return std::exp(label == 1 ? -score : score);
    case Loss::Squared: {
      const double r = static_cast<double>(label) - score;
      return r * r;
    }
  }
  return 0.0;
}

inline double loss_gradient(Loss loss, double score, int label) {
  switch (loss) {
    case Loss::Log: return sigmoid(score) - static_cast<double>(label);
    case Loss::Exponential: {
      const double y = label == 1 ? 1.0 : -1.0;
      return -y * std::exp(-y * score);
    }
    case Loss::Squared: return 2.0 * (score - static_cast<double>(label));
  }
  return 0.0;
}

inline double loss_hessian(Loss loss, double score, int label) {
  switch (loss) {
    case Loss::Log: {
      const double p = sigmoid(score);
      return p * (1.0 - p);
    }
    case Loss::Exponential: {
      const double y = label == 1 ? 1.0 : -1.0;
      return std::exp(-y * score);
    }
    case Loss::Squared: return 2.0;
  }
  return 0.0;
}

// Risk of a probability forecast under the scoring rule (probabilities are
// clamped first so single-class folds never produce NaN).
double probability_risk(Loss loss, const Eigen::VectorXd& probs,
                        const Eigen::VectorXi& labels);

// --- fitted models --------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf contribution, shrinkage already applied
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct ProbabilisticClassifier {
  Family family = Family::LogisticInteraction;
  Loss loss = Loss::Log;

  // logistic: [intercept, feature coefficients...]
  Eigen::VectorXd coefficients;

  // boosting
  std::vector<RegressionTree> trees;
  double base_score = 0.0;

  // training diagnostics
  double final_risk = 0.0;
  int iterations_used = 0;
  bool converged = true;

  // additive score F for each row
  Eigen::VectorXd decision_scores(const Eigen::MatrixXd& features) const;
  // class-1 probability, clamped into [kProbClamp, 1-kProbClamp]
  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& features,
                                long* clamp_count = nullptr) const;
  std::string summary_json() const;
};

ProbabilisticClassifier fit(const ClassifierSpec& spec, const LabeledPairSet& data,
                            ReplicateSeed seed);

// Mean held-out risk under the spec's scoring rule; folds are seeded and
// stratified by label.
double cv_risk(const ClassifierSpec& spec, const LabeledPairSet& data,
               ReplicateSeed seed);

// Case-weighted squared-error gradient boosting for outcome regression.
struct BoostedRegressor {
  std::vector<RegressionTree> trees;
  double base_value = 0.0;
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
};

BoostedRegressor fit_boosted_regressor(const Eigen::MatrixXd& features,
                                       const Eigen::VectorXd& targets,
                                       const Eigen::VectorXd& case_weights,
                                       const BoostParams& params,
                                       ReplicateSeed seed);

}  // namespace pw
