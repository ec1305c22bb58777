#include "pw/resampling.hpp"

#include <stdexcept>

namespace pw {

std::vector<int> bootstrap_observed(const Dataset& dataset, ReplicateSeed seed) {
  const auto n = static_cast<std::uint64_t>(dataset.n());
  Rng rng(seed, purpose::kObservedBootstrap);
  std::vector<int> idx(n);
  for (auto& i : idx) i = static_cast<int>(rng.uniform_below(n));
  return idx;
}

PseudoSample resample_marginals(const Dataset& dataset, ReplicateSeed seed) {
  const auto n = static_cast<std::uint64_t>(dataset.n());
  Rng a_rng(seed, purpose::kMarginalTreatment);
  Rng x_rng(seed, purpose::kMarginalCovariates);
  PseudoSample out;
  out.treatment.resize(static_cast<Eigen::Index>(n));
  out.covariate_rows.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    out.treatment[static_cast<Eigen::Index>(i)] =
        dataset.treatment[static_cast<Eigen::Index>(a_rng.uniform_below(n))];
    out.covariate_rows[i] = static_cast<int>(x_rng.uniform_below(n));
  }
  return out;
}

Eigen::RowVectorXd interaction_row(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                   double a) {
  const Eigen::Index d = x.size();
  Eigen::RowVectorXd row(2 * d + 1);
  row.head(d) = x;
  row[d] = a;
  row.tail(d) = a * x;
  return row;
}

Eigen::MatrixXd interaction_features(const Dataset& dataset) {
  const Eigen::Index n = dataset.n(), d = dataset.d();
  Eigen::MatrixXd f(n, 2 * d + 1);
  for (Eigen::Index i = 0; i < n; ++i)
    f.row(i) = interaction_row(dataset.covariates.row(i), dataset.treatment[i]);
  return f;
}

LabeledPairSet build_training_set(const std::vector<int>& observed_indices,
                                  const PseudoSample& pseudo,
                                  const Dataset& dataset) {
  const Eigen::Index n = dataset.n(), d = dataset.d();
  if (static_cast<Eigen::Index>(observed_indices.size()) != n ||
      pseudo.treatment.size() != n ||
      static_cast<Eigen::Index>(pseudo.covariate_rows.size()) != n)
    throw std::invalid_argument("build_training_set: size mismatch");

  LabeledPairSet set;
  set.features.resize(2 * n, 2 * d + 1);
  set.labels.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int src = observed_indices[i];
    set.features.row(i) =
        interaction_row(dataset.covariates.row(src), dataset.treatment[src]);
    set.labels[i] = 0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    set.features.row(n + i) = interaction_row(
        dataset.covariates.row(pseudo.covariate_rows[i]), pseudo.treatment[i]);
    set.labels[n + i] = 1;
  }
  return set;
}

}  // namespace pw
