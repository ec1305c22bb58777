#include <cmath>
#include <vector>

#include "doctest.h"
#include "pw/diagnostics.hpp"
#include "pw/resampling.hpp"
#include "test_util.hpp"

namespace {

pw::LabeledPairSet training_set(const pw::Dataset& ds, std::uint64_t seed) {
  auto observed = pw::bootstrap_observed(ds, {seed, 0});
  auto pseudo = pw::resample_marginals(ds, {seed, 0});
  return pw::build_training_set(observed, pseudo, ds);
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("true balancing weights zero out every discrepancy row") {
  pw::Dataset ds = pwtest::discrete_2x2(1000);
  pw::WeightSet ws;
  ws.weights = pwtest::true_2x2_weights(ds);
  for (auto basis : {pw::BalanceBasis::Linear, pw::BalanceBasis::Quadratic,
                     pw::BalanceBasis::PairwiseProducts}) {
    pw::BalanceReport report = pw::functional_discrepancy(ds, ws, basis);
    CHECK(report.max_discrepancy <= 1e-12);
  }
}

TEST_CASE("basis construction enumerates the expected rows") {
  pw::Dataset ds;
  ds.treatment.resize(4);
  ds.treatment << 0, 1, 0, 1;
  ds.covariates.resize(4, 2);
  ds.covariates << 1, 2, 3, 4, 5, 6, 7, 8;
  ds.treatment_kind = pw::TreatmentKind::Binary;
  pw::WeightSet unit;
  unit.weights = Eigen::VectorXd::Ones(4);

  auto linear = pw::functional_discrepancy(ds, unit, pw::BalanceBasis::Linear);
  REQUIRE(linear.rows.size() == 2);
  CHECK(linear.rows[0].basis_id == "a*x1");
  CHECK(linear.rows[1].basis_id == "a*x2");

  auto quad = pw::functional_discrepancy(ds, unit, pw::BalanceBasis::Quadratic);
  CHECK(quad.rows.size() == 8);  // {a, a^2} x {x1, x2, x1^2, x2^2}

  auto pairs =
      pw::functional_discrepancy(ds, unit, pw::BalanceBasis::PairwiseProducts);
  CHECK(pairs.rows.size() == 10);  // adds x1*x2 for both treatment functions

  // hand-checked first row: mean(a*x1) = (3+7)/4, target = 0.5 * mean(x1)
  CHECK(linear.rows[0].unweighted == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(linear.rows[0].target == doctest::Approx(0.5 * 4.0).epsilon(1e-12));
  CHECK(linear.rows[0].discrepancy ==
        doctest::Approx(std::abs(2.5 - 2.0)).epsilon(1e-12));
}

TEST_CASE("unit weights make the weighted column equal the unweighted one") {
  pw::Dataset ds = pwtest::independent_binary(200, 4);
  pw::WeightSet unit;
  unit.weights = Eigen::VectorXd::Ones(200);
  auto report =
      pw::functional_discrepancy(ds, unit, pw::BalanceBasis::Quadratic);
  for (const auto& row : report.rows)
    CHECK(row.weighted == doctest::Approx(row.unweighted).epsilon(1e-14));
}

TEST_CASE("discrepancy is invariant to rescaling the weights") {
  pw::Dataset ds = pwtest::discrete_2x2(500);
  pw::WeightSet ws;
  ws.weights = pwtest::true_2x2_weights(ds);
  ws.weights[3] = 7.0;  // perturb so the discrepancy is nonzero
  auto base = pw::functional_discrepancy(ds, ws, pw::BalanceBasis::Linear);
  ws.weights *= 10.0;
  auto scaled = pw::functional_discrepancy(ds, ws, pw::BalanceBasis::Linear);
  CHECK(base.max_discrepancy ==
        doctest::Approx(scaled.max_discrepancy).epsilon(1e-12));
  CHECK(base.max_discrepancy > 0.0);
}

TEST_CASE("score condition holds at the logistic optimum") {
  pw::Dataset ds = pwtest::discrete_2x2(800);
  pw::LabeledPairSet set = training_set(ds, 42);
  pw::ProbabilisticClassifier model =
      pw::fit(pw::default_logistic_spec(), set, {42, 0});
  Eigen::VectorXd resid = pw::score_condition_residual(model, set);
  const double m = static_cast<double>(set.labels.size());
  CHECK(resid.maxCoeff() <= 1e-6 * m);

  // a perturbed model is no longer a stationary point
  model.coefficients[0] += 0.5;
  CHECK(pw::score_condition_residual(model, set).maxCoeff() > 1e-3 * m);
}

TEST_CASE("score condition rejects non-logistic models") {
  pw::Dataset ds = pwtest::discrete_2x2(200);
  pw::LabeledPairSet set = training_set(ds, 1);
  pw::ProbabilisticClassifier boosted;
  boosted.family = pw::Family::GradientBoostedTrees;
  CHECK_THROWS_AS(pw::score_condition_residual(boosted, set),
                  std::invalid_argument);
}

TEST_CASE("bias bound dominates the realized weighting bias") {
  pw::Rng rng(pw::ReplicateSeed{55, 0}, pw::purpose::kDgp);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd y(50), w(50), what(50);
    for (int i = 0; i < 50; ++i) {
      y[i] = 3.0 * rng.normal();
      w[i] = std::exp(rng.normal());
      what[i] = w[i] * std::exp(0.3 * rng.normal());
    }
    pw::BiasBound bound = pw::bias_bound_check(y, w, what);
    CHECK(bound.lhs <= bound.rhs + 1e-15);
  }

  // equality when the integrand never changes sign
  Eigen::VectorXd y = Eigen::VectorXd::Constant(10, 2.0);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(10);
  Eigen::VectorXd what = Eigen::VectorXd::Constant(10, 1.5);
  pw::BiasBound tight = pw::bias_bound_check(y, w, what);
  CHECK(tight.lhs == doctest::Approx(tight.rhs).epsilon(1e-14));
  CHECK(tight.lhs == doctest::Approx(1.0).epsilon(1e-14));

  Eigen::VectorXd shorter = Eigen::VectorXd::Ones(9);
  CHECK_THROWS_AS(pw::bias_bound_check(y, w, shorter), std::invalid_argument);
}

TEST_CASE("risk-balance curve pairs lower risk with better balance") {
  pw::Dataset ds = pwtest::discrete_2x2(1000);
  pw::PwConfig config;
  config.replicates = 20;
  config.threads = 1;
  auto curve = pw::balance_vs_risk_curve(ds, config, {0, 50}, 17);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].capacity == 0);

  // intercept-only: base-rate risk is log(2) on balanced labels, and the
  // uniform weights leave the raw confounding in place
  CHECK(curve[0].held_out_risk == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(curve[0].linear_discrepancy == doctest::Approx(0.15).epsilon(0.05));

  // a trained classifier must beat the base rate and shrink the imbalance
  CHECK(curve[1].held_out_risk < curve[0].held_out_risk);
  CHECK(curve[1].linear_discrepancy < 0.5 * curve[0].linear_discrepancy);
}

}  // TEST_SUITE
