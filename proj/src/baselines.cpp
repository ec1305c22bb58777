#include "pw/baselines.hpp"

#include <stdexcept>

namespace pw {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(kTwoPi));
}
}  // namespace

Eigen::VectorXd PropensityModel::predict_treated_probability(
    const Eigen::MatrixXd& covariates, long* clamp_count) const {
  if (kind == PropensityKind::NormalLinearGPS)
    throw std::invalid_argument("GPS model has no treated-probability");
  return classifier.predict_proba(covariates, clamp_count);
}

PropensityModel fit_propensity(const Dataset& dataset, PropensityKind kind,
                               const ClassifierSpec& spec, ReplicateSeed seed) {
  require_valid(dataset);
  PropensityModel model;
  model.kind = kind;

  if (kind == PropensityKind::NormalLinearGPS) {
    if (dataset.treatment_kind != TreatmentKind::Continuous)
      throw std::invalid_argument("NormalLinearGPS requires continuous treatment");
    const Eigen::Index n = dataset.n(), d = dataset.d();
    Eigen::MatrixXd design(n, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = dataset.covariates;
    model.beta = (design.transpose() * design)
                     .ldlt()
                     .solve(design.transpose() * dataset.treatment);
    const Eigen::VectorXd resid = dataset.treatment - design * model.beta;
    // ML residual SD (divide by n)
    model.residual_sd =
        std::sqrt(std::max(resid.squaredNorm() / static_cast<double>(n), 1e-12));
    model.marginal_mean = dataset.treatment.mean();
    const double var =
        (dataset.treatment.array() - model.marginal_mean).square().sum() /
        static_cast<double>(n);
    model.marginal_sd = std::sqrt(std::max(var, 1e-12));
    return model;
  }

  if (dataset.treatment_kind != TreatmentKind::Binary)
    throw std::invalid_argument("binary propensity model requires binary treatment");

  LabeledPairSet training;
  training.features = dataset.covariates;
  training.labels = dataset.treatment.cast<int>();

  ClassifierSpec ps_spec = spec;
  ps_spec.family = kind == PropensityKind::LogisticPS
                       ? Family::LogisticInteraction
                       : Family::GradientBoostedTrees;
  model.classifier = fit(ps_spec, training, seed);
  return model;
}

WeightSet ipsw_weights(const PropensityModel& model, const Dataset& dataset,
                       bool stabilized) {
  WeightSet ws;
  const Eigen::Index n = dataset.n();
  ws.weights.resize(n);

  if (model.kind == PropensityKind::NormalLinearGPS) {
    if (dataset.treatment_kind != TreatmentKind::Continuous)
      throw std::invalid_argument("GPS weights require continuous treatment");
    Eigen::MatrixXd design(n, dataset.d() + 1);
    design.col(0).setOnes();
    design.rightCols(dataset.d()) = dataset.covariates;
    const Eigen::VectorXd cond_mean = design * model.beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double num =
          normal_pdf(dataset.treatment[i], model.marginal_mean, model.marginal_sd);
      const double den = std::max(
          normal_pdf(dataset.treatment[i], cond_mean[i], model.residual_sd),
          kProbClamp);
      ws.weights[i] = num / den;
    }
    ws.method_tag = "gps";
    return ws;
  }

  if (dataset.treatment_kind != TreatmentKind::Binary)
    throw std::invalid_argument("binary IPSW requires binary treatment");
  const Eigen::VectorXd p1 =
      model.predict_treated_probability(dataset.covariates, &ws.clamp_count);
  const double share1 = dataset.treatment.mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool treated = dataset.treatment[i] == 1.0;
    const double p_obs = treated ? p1[i] : 1.0 - p1[i];
    const double numer = stabilized ? (treated ? share1 : 1.0 - share1) : 1.0;
    ws.weights[i] = numer / p_obs;
  }
  ws.method_tag = std::string(model.kind == PropensityKind::LogisticPS
                                  ? "ps-logit"
                                  : "ps-boosting") +
                  (stabilized ? "-stabilized" : "");
  return ws;
}

}  // namespace pw
