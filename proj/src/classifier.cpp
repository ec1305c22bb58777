#include "pw/classifier.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace pw {

namespace {

double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

// cap on the raw Newton leaf step; pure leaves under log loss would
// otherwise diverge
constexpr double kMaxLeafStep = 10.0;

std::vector<std::vector<int>> sort_feature_orders(const Eigen::MatrixXd& x) {
  const int m = static_cast<int>(x.rows());
  const int k = static_cast<int>(x.cols());
  std::vector<std::vector<int>> order(k);
  for (int f = 0; f < k; ++f) {
    auto& o = order[f];
    o.resize(m);
    std::iota(o.begin(), o.end(), 0);
    const double* col = x.col(f).data();
    std::stable_sort(o.begin(), o.end(),
                     [col](int a, int b) { return col[a] < col[b]; });
  }
  return order;
}

RegressionTree build_tree(const Eigen::MatrixXd& x,
                          const std::vector<std::vector<int>>& order,
                          const std::vector<double>& g,
                          const std::vector<double>& h,
                          const std::vector<char>& active,
                          const BoostParams& params) {
  const int m = static_cast<int>(x.rows());
  const int k = static_cast<int>(x.cols());
  RegressionTree tree;
  tree.nodes.push_back(TreeNode{});

  std::vector<int> node_of(m, -1);
  for (int i = 0; i < m; ++i)
    if (active[i]) node_of[i] = 0;

  std::vector<int> frontier{0};
  const double eps = 1e-12;

  for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
    const int s_count = static_cast<int>(frontier.size());
    std::vector<int> slot(tree.nodes.size(), -1);
    for (int s = 0; s < s_count; ++s) slot[frontier[s]] = s;

    std::vector<double> G(s_count, 0.0), H(s_count, 0.0);
    std::vector<int> CNT(s_count, 0);
    for (int i = 0; i < m; ++i) {
      const int nd = node_of[i];
      if (nd < 0) continue;
      const int s = slot[nd];
      if (s < 0) continue;
      G[s] += g[i];
      H[s] += h[i];
      ++CNT[s];
    }

    std::vector<double> best_gain(s_count, eps);
    std::vector<int> best_feat(s_count, -1);
    std::vector<double> best_thr(s_count, 0.0);

    std::vector<double> GL(s_count), HL(s_count), prev_val(s_count);
    std::vector<int> CL(s_count);
    std::vector<char> seen(s_count);

    for (int f = 0; f < k; ++f) {
      std::fill(GL.begin(), GL.end(), 0.0);
      std::fill(HL.begin(), HL.end(), 0.0);
      std::fill(CL.begin(), CL.end(), 0);
      std::fill(seen.begin(), seen.end(), 0);
      const double* col = x.col(f).data();
      for (const int idx : order[f]) {
        const int nd = node_of[idx];
        if (nd < 0) continue;
        const int s = slot[nd];
        if (s < 0) continue;
        const double v = col[idx];
        if (seen[s] && v > prev_val[s] && CL[s] >= params.min_leaf_size &&
            CNT[s] - CL[s] >= params.min_leaf_size) {
          const double HR = H[s] - HL[s];
          const double GR = G[s] - GL[s];
          const double gain = GL[s] * GL[s] / std::max(HL[s], eps) +
                              GR * GR / std::max(HR, eps) -
                              G[s] * G[s] / std::max(H[s], eps);
          if (gain > best_gain[s]) {
            best_gain[s] = gain;
            best_feat[s] = f;
            best_thr[s] = 0.5 * (prev_val[s] + v);
          }
        }
        GL[s] += g[idx];
        HL[s] += h[idx];
        ++CL[s];
        prev_val[s] = v;
        seen[s] = 1;
      }
    }

    std::vector<int> next_frontier;
    for (int s = 0; s < s_count; ++s) {
      if (best_feat[s] < 0) continue;
      const int nd = frontier[s];
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(TreeNode{});
      tree.nodes.push_back(TreeNode{});
      tree.nodes[nd].feature = best_feat[s];
      tree.nodes[nd].threshold = best_thr[s];
      tree.nodes[nd].left = left;
      tree.nodes[nd].right = left + 1;
      next_frontier.push_back(left);
      next_frontier.push_back(left + 1);
    }
    if (next_frontier.empty()) break;

    for (int i = 0; i < m; ++i) {
      int nd = node_of[i];
      if (nd < 0) continue;
      const TreeNode& node = tree.nodes[nd];
      if (node.feature < 0) continue;
      node_of[i] = x(i, node.feature) <= node.threshold ? node.left : node.right;
    }
    frontier = std::move(next_frontier);
  }

  // Newton leaf values over the final partition
  std::vector<double> LG(tree.nodes.size(), 0.0), LH(tree.nodes.size(), 0.0);
  for (int i = 0; i < m; ++i) {
    const int nd = node_of[i];
    if (nd < 0) continue;
    LG[nd] += g[i];
    LH[nd] += h[i];
  }
  for (std::size_t nd = 0; nd < tree.nodes.size(); ++nd) {
    TreeNode& node = tree.nodes[nd];
    if (node.feature >= 0) continue;
    double step = LH[nd] > eps ? -LG[nd] / LH[nd] : 0.0;
    step = std::min(kMaxLeafStep, std::max(-kMaxLeafStep, step));
    node.value = params.learning_rate * step;
  }
  return tree;
}

double mean_loss(Loss loss, const Eigen::VectorXd& scores,
                 const Eigen::VectorXi& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    total += loss_value(loss, scores[i], labels[i]);
  return total / static_cast<double>(scores.size());
}

ProbabilisticClassifier fit_boosting(const ClassifierSpec& spec,
                                     const LabeledPairSet& data,
                                     ReplicateSeed seed) {
  const auto& params = spec.boost;
  const int m = static_cast<int>(data.features.rows());

  ProbabilisticClassifier model;
  model.family = Family::GradientBoostedTrees;
  model.loss = spec.loss;

  const double p_bar =
      clamp_prob(data.labels.cast<double>().mean());
  switch (spec.loss) {
    case Loss::Log: model.base_score = std::log(p_bar / (1.0 - p_bar)); break;
    case Loss::Exponential:
      model.base_score = 0.5 * std::log(p_bar / (1.0 - p_bar));
      break;
    case Loss::Squared: model.base_score = p_bar; break;
  }

  auto order = sort_feature_orders(data.features);
  Eigen::VectorXd scores = Eigen::VectorXd::Constant(m, model.base_score);
  std::vector<double> g(m), h(m);
  std::vector<char> active(m, 1);
  Rng rng(seed, purpose::kClassifier);

  for (int t = 0; t < params.num_trees; ++t) {
    if (params.subsample_fraction < 1.0) {
      for (int i = 0; i < m; ++i)
        active[i] = rng.uniform01() < params.subsample_fraction ? 1 : 0;
    }
    for (int i = 0; i < m; ++i) {
      g[i] = loss_gradient(spec.loss, scores[i], data.labels[i]);
      h[i] = loss_hessian(spec.loss, scores[i], data.labels[i]);
    }
    RegressionTree tree =
        build_tree(data.features, order, g, h, active, params);
    for (int i = 0; i < m; ++i) scores[i] += tree.predict(data.features.row(i));
    model.trees.push_back(std::move(tree));
  }
  model.iterations_used = params.num_trees;
  model.final_risk = mean_loss(spec.loss, scores, data.labels);
  return model;
}

ProbabilisticClassifier fit_logistic(const ClassifierSpec& spec,
                                     const LabeledPairSet& data) {
  if (spec.loss != Loss::Log)
    throw std::invalid_argument(
        "LogisticInteraction is trained under log loss only");
  const auto& params = spec.logistic;
  const Eigen::Index m = data.features.rows();
  const Eigen::Index p = data.features.cols() + 1;

  Eigen::MatrixXd design(m, p);
  design.col(0).setOnes();
  design.rightCols(p - 1) = data.features;
  Eigen::VectorXd c = data.labels.cast<double>();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd penalty_mask = Eigen::VectorXd::Ones(p);
  penalty_mask[0] = 0.0;  // intercept unpenalized

  auto objective = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = design * b;
    double nll = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
      nll += loss_value(Loss::Log, eta[i], data.labels[i]);
    return nll + 0.5 * params.l2_penalty *
                     (penalty_mask.array() * b.array().square()).sum();
  };

  ProbabilisticClassifier model;
  model.family = Family::LogisticInteraction;
  model.loss = Loss::Log;
  model.converged = false;

  double obj = objective(beta);
  const double grad_tol = params.tolerance * static_cast<double>(m);

  int it = 0;
  for (; it < params.max_iterations; ++it) {
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd prob(m), w(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      prob[i] = sigmoid(eta[i]);
      w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-10);
    }
    Eigen::VectorXd grad = design.transpose() * (c - prob) -
                           params.l2_penalty * (penalty_mask.array() * beta.array()).matrix();
    if (grad.lpNorm<Eigen::Infinity>() <= grad_tol) {
      model.converged = true;
      break;
    }
    Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
    hess.diagonal() += params.l2_penalty * penalty_mask;
    Eigen::VectorXd delta = hess.ldlt().solve(grad);

    // Newton step with halving fallback
    double step = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      const Eigen::VectorXd cand = beta + step * delta;
      const double cand_obj = objective(cand);
      if (cand_obj <= obj + 1e-14 * std::abs(obj)) {
        beta = cand;
        obj = cand_obj;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;  // stalled; keep last iterate
  }
  model.iterations_used = it;
  model.coefficients = beta;
  model.final_risk = obj / static_cast<double>(m);
  return model;
}

}  // namespace

LossDivergence loss_divergence(Loss loss) {
  switch (loss) {
    case Loss::Log:
      return {"(t/2)log(t/(t+1)) - (1/2)log((t+1)/4)", "Jensen-Shannon"};
    case Loss::Exponential: return {"(sqrt(t) - 1)^2", "Hellinger"};
    case Loss::Squared: return {"(t-1)^2/(t+1)", "triangular discrimination"};
  }
  return {"", ""};
}

const char* loss_name(Loss loss) {
  switch (loss) {
    case Loss::Log: return "log";
    case Loss::Exponential: return "exponential";
    case Loss::Squared: return "squared";
  }
  return "?";
}

ClassifierSpec default_logistic_spec() {
  ClassifierSpec spec;
  spec.family = Family::LogisticInteraction;
  spec.loss = Loss::Log;
  return spec;
}

ClassifierSpec default_boosting_spec() {
  ClassifierSpec spec;
  spec.family = Family::GradientBoostedTrees;
  spec.loss = Loss::Exponential;
  spec.boost = BoostParams{100, 2, 0.1, 10, 1.0};
  spec.cv_folds = 5;
  for (int depth : {1, 2})
    for (int trees : {50, 100}) {
      BoostParams p = spec.boost;
      p.max_depth = depth;
      p.num_trees = trees;
      spec.cv_grid_boost.push_back(p);
    }
  return spec;
}

double probability_risk(Loss loss, const Eigen::VectorXd& probs,
                        const Eigen::VectorXi& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    const int c = labels[i];
    switch (loss) {
      case Loss::Log:
        total += c == 1 ? -std::log(p) : -std::log(1.0 - p);
        break;
      case Loss::Exponential:
        total += c == 1 ? std::sqrt((1.0 - p) / p) : std::sqrt(p / (1.0 - p));
        break;
      case Loss::Squared: {
        const double r = static_cast<double>(c) - p;
        total += r * r;
        break;
      }
    }
  }
  return total / static_cast<double>(probs.size());
}

double RegressionTree::predict(
    const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int nd = 0;
  while (nodes[nd].feature >= 0)
    nd = row[nodes[nd].feature] <= nodes[nd].threshold ? nodes[nd].left
                                                       : nodes[nd].right;
  return nodes[nd].value;
}

Eigen::VectorXd ProbabilisticClassifier::decision_scores(
    const Eigen::MatrixXd& features) const {
  Eigen::VectorXd scores;
  if (family == Family::LogisticInteraction) {
    if (features.cols() + 1 != coefficients.size())
      throw std::invalid_argument("predict_proba: feature width mismatch");
    scores = (features * coefficients.tail(coefficients.size() - 1)).array() +
             coefficients[0];
  } else {
    scores = Eigen::VectorXd::Constant(features.rows(), base_score);
    for (const auto& tree : trees)
      for (Eigen::Index i = 0; i < features.rows(); ++i)
        scores[i] += tree.predict(features.row(i));
  }
  return scores;
}

Eigen::VectorXd ProbabilisticClassifier::predict_proba(
    const Eigen::MatrixXd& features, long* clamp_count) const {
  Eigen::VectorXd scores = decision_scores(features);
  Eigen::VectorXd probs(scores.size());
  long clamps = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double raw = score_to_prob(loss, scores[i]);
    probs[i] = clamp_prob(raw);
    if (probs[i] != raw) ++clamps;
  }
  if (clamp_count) *clamp_count += clamps;
  return probs;
}

std::string ProbabilisticClassifier::summary_json() const {
  std::ostringstream os;
  os << "{\"family\":\""
     << (family == Family::LogisticInteraction ? "logistic_interaction"
                                               : "gradient_boosted_trees")
     << "\",\"loss\":\"" << loss_name(loss) << "\",\"bregman\":\""
     << loss_divergence(loss).bregman << "\",\"final_risk\":" << final_risk
     << ",\"iterations_used\":" << iterations_used << ",\"converged\":"
     << (converged ? "true" : "false");
  if (family == Family::GradientBoostedTrees)
    os << ",\"num_trees\":" << trees.size();
  os << "}";
  return os.str();
}

ProbabilisticClassifier fit(const ClassifierSpec& spec, const LabeledPairSet& data,
                            ReplicateSeed seed) {
  if (data.features.rows() != data.labels.size() || data.labels.size() == 0)
    throw std::invalid_argument("fit: malformed training set");
  const int ones = (data.labels.array() == 1).count();
  if (ones == 0 || ones == data.labels.size())
    throw std::invalid_argument("fit: both classes must be present");

  ClassifierSpec chosen = spec;
  const bool has_grid = spec.family == Family::LogisticInteraction
                            ? !spec.cv_grid_logistic.empty()
                            : !spec.cv_grid_boost.empty();
  if (spec.cv_folds >= 2 && has_grid) {
    double best = std::numeric_limits<double>::infinity();
    if (spec.family == Family::LogisticInteraction) {
      for (const auto& params : spec.cv_grid_logistic) {
        ClassifierSpec cand = spec;
        cand.logistic = params;
        const double risk = cv_risk(cand, data, seed);
        if (risk < best) {
          best = risk;
          chosen.logistic = params;
        }
      }
    } else {
      for (const auto& params : spec.cv_grid_boost) {
        ClassifierSpec cand = spec;
        cand.boost = params;
        const double risk = cv_risk(cand, data, seed);
        if (risk < best) {
          best = risk;
          chosen.boost = params;
        }
      }
    }
  }

  return chosen.family == Family::LogisticInteraction
             ? fit_logistic(chosen, data)
             : fit_boosting(chosen, data, seed);
}

double cv_risk(const ClassifierSpec& spec, const LabeledPairSet& data,
               ReplicateSeed seed) {
  if (spec.cv_folds < 2)
    throw std::invalid_argument("cv_risk: cv_folds must be >= 2");
  const int m = static_cast<int>(data.labels.size());
  const int folds = spec.cv_folds;

  // stratified fold assignment: shuffle within class, deal round-robin
  Rng rng(seed, purpose::kCrossValidation);
  std::vector<int> fold_of(m);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<int> members;
    for (int i = 0; i < m; ++i)
      if (data.labels[i] == cls) members.push_back(i);
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[rng.uniform_below(i)]);
    for (std::size_t i = 0; i < members.size(); ++i)
      fold_of[members[i]] = static_cast<int>(i % folds);
  }

  ClassifierSpec inner = spec;
  inner.cv_folds = 0;
  inner.cv_grid_logistic.clear();
  inner.cv_grid_boost.clear();

  double total_risk = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_rows, test_rows;
    for (int i = 0; i < m; ++i)
      (fold_of[i] == f ? test_rows : train_rows).push_back(i);

    LabeledPairSet train;
    train.features.resize(static_cast<Eigen::Index>(train_rows.size()),
                          data.features.cols());
    train.labels.resize(static_cast<Eigen::Index>(train_rows.size()));
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      train.features.row(static_cast<Eigen::Index>(i)) =
          data.features.row(train_rows[i]);
      train.labels[static_cast<Eigen::Index>(i)] = data.labels[train_rows[i]];
    }

    Eigen::MatrixXd test_x(static_cast<Eigen::Index>(test_rows.size()),
                           data.features.cols());
    Eigen::VectorXi test_c(static_cast<Eigen::Index>(test_rows.size()));
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      test_x.row(static_cast<Eigen::Index>(i)) = data.features.row(test_rows[i]);
      test_c[static_cast<Eigen::Index>(i)] = data.labels[test_rows[i]];
    }

    ReplicateSeed fold_seed{seed.master_seed,
                            seed.replicate_index * 1000003u + static_cast<std::uint32_t>(f)};
    ProbabilisticClassifier model = fit(inner, train, fold_seed);
    total_risk += probability_risk(spec.loss, model.predict_proba(test_x), test_c);
  }
  return total_risk / folds;
}

Eigen::VectorXd BoostedRegressor::predict(const Eigen::MatrixXd& features) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(features.rows(), base_value);
  for (const auto& tree : trees)
    for (Eigen::Index i = 0; i < features.rows(); ++i)
      out[i] += tree.predict(features.row(i));
  return out;
}

BoostedRegressor fit_boosted_regressor(const Eigen::MatrixXd& features,
                                       const Eigen::VectorXd& targets,
                                       const Eigen::VectorXd& case_weights,
                                       const BoostParams& params,
                                       ReplicateSeed seed) {
  const int m = static_cast<int>(features.rows());
  BoostedRegressor model;
  const double wsum = case_weights.sum();
  model.base_value = wsum > 0 ? case_weights.dot(targets) / wsum : targets.mean();

  auto order = sort_feature_orders(features);
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(m, model.base_value);
  std::vector<double> g(m), h(m);
  std::vector<char> active(m, 1);
  Rng rng(seed, purpose::kClassifier);

  for (int t = 0; t < params.num_trees; ++t) {
    if (params.subsample_fraction < 1.0) {
      for (int i = 0; i < m; ++i)
        active[i] = rng.uniform01() < params.subsample_fraction ? 1 : 0;
    }
    for (int i = 0; i < m; ++i) {
      g[i] = 2.0 * case_weights[i] * (pred[i] - targets[i]);
      h[i] = 2.0 * case_weights[i];
    }
    RegressionTree tree = build_tree(features, order, g, h, active, params);
    for (int i = 0; i < m; ++i) pred[i] += tree.predict(features.row(i));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace pw
