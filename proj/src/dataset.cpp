#include "pw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pw {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) {
    // trim whitespace and a trailing \r
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, std::size_t row,
                  const std::string& column) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw DataError("parse error at row " + std::to_string(row) + ", column '" +
                    column + "': '" + cell + "' is not numeric");
  }
  if (pos != cell.size())
    throw DataError("parse error at row " + std::to_string(row) + ", column '" +
                    column + "': '" + cell + "' is not numeric");
  return v;
}

}  // namespace

TreatmentKind infer_treatment_kind(const Eigen::VectorXd& treatment) {
  for (Eigen::Index i = 0; i < treatment.size(); ++i) {
    if (treatment[i] != 0.0 && treatment[i] != 1.0)
      return TreatmentKind::Continuous;
  }
  return TreatmentKind::Binary;
}

std::vector<std::string> validate(const Dataset& ds) {
  std::vector<std::string> errors;
  const Eigen::Index n = ds.n();
  if (n < 2) errors.push_back("size error: n = " + std::to_string(n) + " < 2");
  if (ds.d() < 1) errors.push_back("size error: d < 1");
  if (ds.covariates.rows() != n)
    errors.push_back("size error: covariates rows != treatment length");
  if (ds.has_outcome() && ds.outcome.size() != n)
    errors.push_back("size error: outcome length != treatment length");

  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(ds.treatment[i]))
      errors.push_back("non-finite treatment at row " + std::to_string(i));
  }
  if (ds.has_outcome()) {
    for (Eigen::Index i = 0; i < ds.outcome.size(); ++i) {
      if (!std::isfinite(ds.outcome[i]))
        errors.push_back("non-finite outcome at row " + std::to_string(i));
    }
  }
  for (Eigen::Index i = 0; i < ds.covariates.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.covariates.cols(); ++j) {
      if (!std::isfinite(ds.covariates(i, j)))
        errors.push_back("non-finite covariate at (row " + std::to_string(i) +
                         ", column " + std::to_string(j) + ")");
    }
  }

  if (ds.treatment_kind == TreatmentKind::Binary) {
    Eigen::Index ones = 0, zeros = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (ds.treatment[i] == 1.0)
        ++ones;
      else if (ds.treatment[i] == 0.0)
        ++zeros;
      else
        errors.push_back("binary treatment value not in {0,1} at row " +
                         std::to_string(i));
    }
    if (n >= 2 && (ones == 0 || zeros == 0))
      errors.push_back("single treatment arm");
  }
  return errors;
}

void require_valid(const Dataset& ds) {
  auto errors = validate(ds);
  if (!errors.empty()) {
    std::string msg = "invalid dataset:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw DataError(msg);
  }
}

Dataset load_dataset(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);

  std::string header_line;
  if (!std::getline(in, header_line))
    throw DataError("empty file: " + path);
  auto header = split_line(header_line, schema.delimiter);

  auto column_index = [&](const std::string& name) -> Eigen::Index {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw DataError("schema error: missing column '" + name + "'");
    return static_cast<Eigen::Index>(it - header.begin());
  };

  const Eigen::Index a_col = column_index(schema.treatment_column);
  Eigen::Index y_col = -1;
  if (schema.outcome_column) y_col = column_index(*schema.outcome_column);
  if (schema.covariate_columns.empty())
    throw DataError("schema error: no covariate columns given");
  std::vector<Eigen::Index> x_cols;
  for (const auto& c : schema.covariate_columns) x_cols.push_back(column_index(c));

  std::vector<double> a, y;
  std::vector<std::vector<double>> x;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size())
      throw DataError("parse error at row " + std::to_string(row) +
                      ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(cells.size()));
    a.push_back(parse_cell(cells[a_col], row, schema.treatment_column));
    if (y_col >= 0) y.push_back(parse_cell(cells[y_col], row, *schema.outcome_column));
    std::vector<double> xr;
    for (std::size_t j = 0; j < x_cols.size(); ++j)
      xr.push_back(parse_cell(cells[x_cols[j]], row, schema.covariate_columns[j]));
    x.push_back(std::move(xr));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(a.size());
  if (n < 2) throw DataError("size error: n = " + std::to_string(n) + " < 2");

  Dataset ds;
  ds.treatment = Eigen::Map<Eigen::VectorXd>(a.data(), n);
  if (y_col >= 0) ds.outcome = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  ds.covariates.resize(n, static_cast<Eigen::Index>(x_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < ds.covariates.cols(); ++j)
      ds.covariates(i, j) = x[i][j];
  ds.treatment_kind =
      schema.kind_override ? *schema.kind_override : infer_treatment_kind(ds.treatment);
  require_valid(ds);
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds, char delimiter) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  char buf[64];
  out << "a";
  if (ds.has_outcome()) out << delimiter << "y";
  for (Eigen::Index j = 0; j < ds.d(); ++j) out << delimiter << "x" << (j + 1);
  out << "\n";
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    put(ds.treatment[i]);
    if (ds.has_outcome()) {
      out << delimiter;
      put(ds.outcome[i]);
    }
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      out << delimiter;
      put(ds.covariates(i, j));
    }
    out << "\n";
  }
}

void write_weights(const std::string& path, const WeightSet& ws) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  char buf[64];
  out << "unit_index,weight\n";
  for (Eigen::Index i = 0; i < ws.weights.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g", static_cast<long>(i), ws.weights[i]);
    out << buf << "\n";
  }
}

Eigen::VectorXd read_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty weights file: " + path);
  std::vector<double> w;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_line(line, ',');
    if (cells.size() != 2)
      throw DataError("parse error in weights file at row " + std::to_string(row));
    w.push_back(parse_cell(cells[1], row, "weight"));
  }
  return Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

WeightSet hajek_normalize(WeightSet ws) {
  const double total = ws.weights.sum();
  if (total > 0.0)
    ws.weights *= static_cast<double>(ws.weights.size()) / total;
  ws.normalization = Normalization::Hajek;
  return ws;
}

}  // namespace pw
