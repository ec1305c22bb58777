#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pw {

enum class TreatmentKind { Binary, Continuous };
enum class Normalization { None, Hajek };

// One observational sample: treatment, optional outcome, dense covariates.
// Immutable after construction; safe to share read-only across workers.
struct Dataset {
  Eigen::VectorXd treatment;   // length n
  Eigen::VectorXd outcome;     // length n, or empty for weight-only workflows
  Eigen::MatrixXd covariates;  // n x d, rows are units
  TreatmentKind treatment_kind = TreatmentKind::Binary;

  Eigen::Index n() const { return treatment.size(); }
  Eigen::Index d() const { return covariates.cols(); }
  bool has_outcome() const { return outcome.size() > 0; }
};

// Per-unit importance weights plus provenance of how they were estimated.
struct WeightSet {
  Eigen::VectorXd weights;
  int replicates = 1;
  Normalization normalization = Normalization::None;
  long clamp_count = 0;
  std::string method_tag;
};

enum class EstimandKind { BinaryMeans, ATE, DoseResponseCurve };

struct EstimandRequest {
  EstimandKind kind = EstimandKind::ATE;
  std::vector<double> grid;  // evaluation points for DoseResponseCurve
};

struct Schema {
  std::string treatment_column;
  std::optional<std::string> outcome_column;
  std::vector<std::string> covariate_columns;
  char delimiter = ',';
  std::optional<TreatmentKind> kind_override;
};

// Thrown for malformed input files / schemas; maps to CLI exit code 1.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Returns the list of violated invariants; empty means the dataset is valid.
std::vector<std::string> validate(const Dataset& dataset);

// Throws DataError if validate() reports anything.
void require_valid(const Dataset& dataset);

Dataset load_dataset(const std::string& path, const Schema& schema);
void save_dataset(const std::string& path, const Dataset& dataset,
                  char delimiter = ',');

TreatmentKind infer_treatment_kind(const Eigen::VectorXd& treatment);

void write_weights(const std::string& path, const WeightSet& ws);
Eigen::VectorXd read_weights(const std::string& path);

// Hajek-normalize so the weights sum to n.
WeightSet hajek_normalize(WeightSet ws);

}  // namespace pw
