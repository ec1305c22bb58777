#include <cmath>

#include "doctest.h"
#include "pw/baselines.hpp"
#include "pw/engine.hpp"
#include "pw/simulation.hpp"
#include "test_util.hpp"

namespace {

// n=4 binary dataset with one treated/control pair per covariate level
pw::Dataset four_unit_binary() {
  pw::Dataset ds;
  ds.treatment.resize(4);
  ds.treatment << 1, 1, 0, 0;
  ds.covariates.resize(4, 1);
  ds.covariates << 0.0, 1.0, 0.0, 1.0;
  ds.treatment_kind = pw::TreatmentKind::Binary;
  return ds;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("logistic propensity recovers an intercept-only 0.7 assignment") {
  const int n = 10000;
  pw::Rng rng(pw::ReplicateSeed{31, 0}, pw::purpose::kDgp);
  pw::Dataset ds;
  ds.treatment.resize(n);
  ds.covariates.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    ds.treatment[i] = rng.uniform01() < 0.7 ? 1.0 : 0.0;
    ds.covariates(i, 0) = rng.normal();
    ds.covariates(i, 1) = rng.normal();
  }
  ds.treatment_kind = pw::TreatmentKind::Binary;
  pw::PropensityModel model = pw::fit_propensity(
      ds, pw::PropensityKind::LogisticPS, pw::default_logistic_spec(), {31, 0});
  Eigen::VectorXd p = model.predict_treated_probability(ds.covariates);
  CHECK(std::abs(p.mean() - 0.7) < 0.03);
  CHECK((p.array() - p.mean()).abs().maxCoeff() < 0.1);
}

TEST_CASE("logistic propensity tracks the generating propensity") {
  auto [ds, oracle] = pw::draw_dgp({pw::DgpKind::KsBinary, false, 10000, 5});
  pw::PropensityModel model = pw::fit_propensity(
      ds, pw::PropensityKind::LogisticPS, pw::default_logistic_spec(), {5, 0});
  // at x = 0 the generating model assigns treatment with probability 1/2
  Eigen::MatrixXd origin = Eigen::MatrixXd::Zero(1, ds.d());
  CHECK(std::abs(model.predict_treated_probability(origin)[0] - 0.5) < 0.03);
  Eigen::VectorXd p = model.predict_treated_probability(ds.covariates);
  CHECK((p - oracle.true_propensity).cwiseAbs().mean() < 0.03);
}

TEST_CASE("gps model with matching marginal gives unit weights exactly") {
  pw::Dataset ds;
  ds.treatment.resize(3);
  ds.treatment << -1.0, 2.0, 4.5;
  ds.covariates = Eigen::MatrixXd::Random(3, 2);
  ds.treatment_kind = pw::TreatmentKind::Continuous;

  pw::PropensityModel model;
  model.kind = pw::PropensityKind::NormalLinearGPS;
  model.beta = Eigen::VectorXd::Zero(3);
  model.beta[0] = 2.0;  // intercept only: conditional == marginal
  model.residual_sd = 1.5;
  model.marginal_mean = 2.0;
  model.marginal_sd = 1.5;

  pw::WeightSet ws = pw::ipsw_weights(model, ds, /*stabilized=*/true);
  CHECK((ws.weights.array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("gps fit recovers the linear treatment model") {
  const int n = 20000;
  pw::Rng rng(pw::ReplicateSeed{77, 0}, pw::purpose::kDgp);
  pw::Dataset ds;
  ds.treatment.resize(n);
  ds.covariates.resize(n, 1);
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    ds.covariates(i, 0) = x;
    ds.treatment[i] = 1.0 + 0.8 * x + rng.normal();
  }
  ds.treatment_kind = pw::TreatmentKind::Continuous;
  pw::PropensityModel model = pw::fit_propensity(
      ds, pw::PropensityKind::NormalLinearGPS, {}, {77, 0});
  CHECK(model.beta[0] == doctest::Approx(1.0).epsilon(0.05));
  CHECK(model.beta[1] == doctest::Approx(0.8).epsilon(0.05));
  CHECK(model.residual_sd == doctest::Approx(1.0).epsilon(0.05));
  // marginal: mean 1, sd sqrt(0.8^2 + 1)
  CHECK(model.marginal_sd == doctest::Approx(std::sqrt(1.64)).epsilon(0.05));
  CHECK_THROWS_AS(model.predict_treated_probability(ds.covariates),
                  std::invalid_argument);
}

TEST_CASE("stabilized binary weights equal arm share over propensity") {
  pw::Dataset ds = four_unit_binary();
  pw::PropensityModel model;
  model.kind = pw::PropensityKind::LogisticPS;
  model.classifier.family = pw::Family::LogisticInteraction;
  model.classifier.coefficients = Eigen::VectorXd::Zero(2);
  model.classifier.coefficients[0] = std::log(1.0 / 3.0);  // p = 1/4 everywhere

  pw::WeightSet stab = pw::ipsw_weights(model, ds, true);
  pw::WeightSet unstab = pw::ipsw_weights(model, ds, false);
  // arm share is 1/2; treated: (1/2)/(1/4), control: (1/2)/(3/4)
  CHECK(stab.weights[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(stab.weights[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(unstab.weights[0] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(unstab.weights[2] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("propensity clamp bounds the weight at one over the clamp") {
  pw::Dataset ds = four_unit_binary();
  pw::PropensityModel model;
  model.kind = pw::PropensityKind::LogisticPS;
  model.classifier.coefficients = Eigen::VectorXd::Zero(2);
  model.classifier.coefficients[0] = -50.0;  // p underflows below the clamp
  pw::WeightSet ws = pw::ipsw_weights(model, ds, false);
  CHECK(ws.weights[0] == doctest::Approx(1.0 / pw::kProbClamp).epsilon(1e-9));
  CHECK(ws.clamp_count == 4);
}

TEST_CASE("stabilization leaves per-arm Hajek means unchanged") {
  auto [ds, oracle] = pw::draw_dgp({pw::DgpKind::KsBinary, false, 2000, 9});
  pw::PropensityModel model = pw::fit_propensity(
      ds, pw::PropensityKind::LogisticPS, pw::default_logistic_spec(), {9, 0});
  pw::BinaryMeans stab =
      pw::weighted_means_binary(ds, pw::ipsw_weights(model, ds, true));
  pw::BinaryMeans unstab =
      pw::weighted_means_binary(ds, pw::ipsw_weights(model, ds, false));
  CHECK(stab.mean_treated == doctest::Approx(unstab.mean_treated).epsilon(1e-12));
  CHECK(stab.mean_control == doctest::Approx(unstab.mean_control).epsilon(1e-12));
  CHECK(stab.ate == doctest::Approx(unstab.ate).epsilon(1e-10));
}

TEST_CASE("ipsw and permutation weights agree when both models hold") {
  // with a correctly specified propensity and a rich classifier basis the two
  // weight estimates target the same density ratio
  auto [ds, oracle] = pw::draw_dgp({pw::DgpKind::KsBinary, false, 2000, 21});
  pw::PropensityModel model = pw::fit_propensity(
      ds, pw::PropensityKind::LogisticPS, pw::default_logistic_spec(), {21, 0});
  pw::WeightSet ipsw = pw::hajek_normalize(pw::ipsw_weights(model, ds, true));

  pw::PwConfig config;
  config.replicates = 100;
  config.threads = 1;
  pw::WeightSet perm =
      pw::estimate_pw_weights(pw::quadratic_basis(ds), config, 21);
  CHECK((ipsw.weights - perm.weights).cwiseAbs().mean() < 0.08);
}

}  // TEST_SUITE
