#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "pw/dataset.hpp"

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  std::string path = std::string("/tmp/pw_test_") + name;
  std::ofstream out(path);
  out << body;
  return path;
}

pw::Dataset toy_binary(int n = 6) {
  pw::Dataset ds;
  ds.treatment.resize(n);
  ds.outcome.resize(n);
  ds.covariates.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    ds.treatment[i] = i % 2;
    ds.outcome[i] = 1.5 * i;
    ds.covariates(i, 0) = 0.1 * i;
    ds.covariates(i, 1) = -0.2 * i + 1.0;
  }
  ds.treatment_kind = pw::TreatmentKind::Binary;
  return ds;
}

}  // namespace

TEST_SUITE("core-data") {

TEST_CASE("load_dataset infers binary treatment from {0,1} values") {
  auto path = write_temp("bin.csv", "a,y,x1\n0,1.0,0.5\n1,2.0,0.25\n1,0.5,-1\n0,3.5,2\n");
  pw::Schema schema;
  schema.treatment_column = "a";
  schema.outcome_column = "y";
  schema.covariate_columns = {"x1"};
  pw::Dataset ds = pw::load_dataset(path, schema);
  CHECK(ds.n() == 4);
  CHECK(ds.d() == 1);
  CHECK(ds.treatment_kind == pw::TreatmentKind::Binary);
  CHECK(ds.has_outcome());
  CHECK(ds.outcome[3] == doctest::Approx(3.5));
}

TEST_CASE("load_dataset infers continuous treatment from non-{0,1} values") {
  auto path =
      write_temp("cont.csv", "a,y,x1\n0.0,1,1\n0.5,2,2\n1.0,3,3\n0.3,4,4\n");
  pw::Schema schema;
  schema.treatment_column = "a";
  schema.outcome_column = "y";
  schema.covariate_columns = {"x1"};
  pw::Dataset ds = pw::load_dataset(path, schema);
  CHECK(ds.treatment_kind == pw::TreatmentKind::Continuous);
}

TEST_CASE("load_dataset reports the row of a non-numeric cell") {
  auto path = write_temp("na.csv", "a,y,x1\n0,1,0.5\n1,2,NA\n0,3,1\n");
  pw::Schema schema;
  schema.treatment_column = "a";
  schema.outcome_column = "y";
  schema.covariate_columns = {"x1"};
  try {
    pw::load_dataset(path, schema);
    FAIL("expected DataError");
  } catch (const pw::DataError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("load_dataset rejects a missing schema column") {
  auto path = write_temp("missing.csv", "a,y\n0,1\n1,2\n");
  pw::Schema schema;
  schema.treatment_column = "a";
  schema.covariate_columns = {"x9"};
  CHECK_THROWS_AS(pw::load_dataset(path, schema), pw::DataError);
}

TEST_CASE("validate flags a single treatment arm") {
  pw::Dataset ds = toy_binary();
  ds.treatment.setOnes();
  auto errors = pw::validate(ds);
  bool found = false;
  for (const auto& e : errors) found |= e.find("single treatment arm") != std::string::npos;
  CHECK(found);
}

TEST_CASE("validate accepts a valid continuous dataset") {
  pw::Dataset ds = toy_binary();
  ds.treatment_kind = pw::TreatmentKind::Continuous;
  ds.treatment[0] = 0.37;
  CHECK(pw::validate(ds).empty());
}

TEST_CASE("validate names the location of a NaN covariate") {
  pw::Dataset ds = toy_binary();
  ds.covariates(3, 1) = std::nan("");
  auto errors = pw::validate(ds);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("row 3") != std::string::npos);
  CHECK(errors[0].find("column 1") != std::string::npos);
}

TEST_CASE("validate rejects binary treatment values outside {0,1}") {
  pw::Dataset ds = toy_binary();
  ds.treatment[2] = 0.5;  // kind stays Binary
  CHECK(!pw::validate(ds).empty());
}

TEST_CASE("save/load round-trip preserves values") {
  pw::Dataset ds = toy_binary();
  auto path = write_temp("round.csv", "");
  pw::save_dataset(path, ds);
  pw::Schema schema;
  schema.treatment_column = "a";
  schema.outcome_column = "y";
  schema.covariate_columns = {"x1", "x2"};
  pw::Dataset back = pw::load_dataset(path, schema);
  REQUIRE(back.n() == ds.n());
  REQUIRE(back.d() == ds.d());
  CHECK((back.treatment - ds.treatment).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((back.outcome - ds.outcome).cwiseAbs().maxCoeff() <= 1e-12);
  for (int i = 0; i < ds.n(); ++i)
    for (int j = 0; j < ds.d(); ++j) {
      const double ref = ds.covariates(i, j);
      CHECK(std::abs(back.covariates(i, j) - ref) <=
            1e-12 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("weights file round-trip") {
  pw::WeightSet ws;
  ws.weights.resize(4);
  ws.weights << 0.5, 1.25, 2.0, 0.125;
  ws.method_tag = "test";
  auto path = write_temp("w.csv", "");
  pw::write_weights(path, ws);
  Eigen::VectorXd back = pw::read_weights(path);
  REQUIRE(back.size() == 4);
  CHECK((back - ws.weights).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("hajek_normalize makes weights sum to n") {
  pw::WeightSet ws;
  ws.weights.resize(5);
  ws.weights << 10, 20, 30, 40, 50;
  pw::WeightSet out = pw::hajek_normalize(ws);
  CHECK(out.normalization == pw::Normalization::Hajek);
  CHECK(out.weights.sum() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("infer_treatment_kind") {
  Eigen::VectorXd b(3);
  b << 0, 1, 1;
  CHECK(pw::infer_treatment_kind(b) == pw::TreatmentKind::Binary);
  b[1] = 0.5;
  CHECK(pw::infer_treatment_kind(b) == pw::TreatmentKind::Continuous);
}

}  // TEST_SUITE
