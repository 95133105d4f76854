#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfm/matrix.hpp"

namespace sfm {

enum class ColumnKind { continuous, categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
};

struct FeatureSchema {
  std::vector<ColumnSpec> columns;
  std::string time_column = "time";
  std::string event_column = "event";

  /// Throws SchemaError on duplicate names or a time/event column that is
  /// also listed as a covariate.
  void validate() const;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse failure tied to one CSV line (1-based, header is line 1).
class RowError : public std::runtime_error {
 public:
  RowError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// One covariate column before encoding. Only the vector matching `spec.kind`
/// is populated; std::nullopt marks a missing cell.
struct RawColumn {
  ColumnSpec spec;
  std::vector<std::optional<double>> numeric;
  std::vector<std::optional<std::string>> labels;

  std::size_t missing() const;
};

/// Covariates as read from disk, with missing entries still marked.
struct RawDataset {
  FeatureSchema schema;
  std::vector<RawColumn> columns;
  std::vector<double> t;
  std::vector<int> y;

  std::size_t size() const { return t.size(); }
  std::size_t missing() const;
};

/// Encoded, fully numeric dataset ready for modelling.
struct SurvDataset {
  Matrix X;
  std::vector<double> t;
  std::vector<int> y;
  FeatureSchema schema;
  /// Names of the encoded columns, e.g. "stage=II" for one-hot levels.
  std::vector<std::string> feature_names;

  std::size_t size() const { return t.size(); }
  std::size_t width() const { return X.cols(); }
  double event_fraction() const;
};

/// Empty cells and the literal "NA" are missing.
RawDataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema);
RawDataset load_csv(std::istream& in, const FeatureSchema& schema);

/// Writes an encoded dataset back out as CSV with the schema's time/event
/// column names; values use round-trip precision.
void write_csv(const std::filesystem::path& path, const SurvDataset& ds);

/// Fill values learned from a training split.
struct ImputeStats {
  std::map<std::string, double> medians;
  std::map<std::string, std::string> modes;
};

ImputeStats fit_impute(const RawDataset& train);
RawDataset impute(const RawDataset& ds, const ImputeStats& stats);
/// Imputes using statistics of `ds` itself.
RawDataset impute(const RawDataset& ds);

/// Standardization and one-hot tables learned from a training split.
struct EncodeStats {
  std::map<std::string, double> means;
  /// Population standard deviation; 0 marks a constant column that is
  /// centred but left unscaled.
  std::map<std::string, double> stds;
  std::map<std::string, std::vector<std::string>> levels;
  std::vector<std::string> warnings;

  std::size_t width(const FeatureSchema& schema) const;
};

EncodeStats fit_encode(const RawDataset& train);
/// Requires an imputed dataset. Unseen categorical levels encode as all zeros.
SurvDataset encode(const RawDataset& ds, const EncodeStats& stats);

/// Imputation followed by encoding, fitted on one split and applied to any.
struct Preprocessor {
  ImputeStats impute;
  EncodeStats encode;

  static Preprocessor fit(const RawDataset& train);
  SurvDataset apply(const RawDataset& ds) const;
};

struct SplitSpec {
  std::array<double, 3> fractions{0.8, 0.1, 0.1};  // train, valid, test
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> train, valid, test;
};

/// Shuffles the event and censored rows separately and cuts each by the
/// requested fractions, so every split keeps the global event proportion.
/// Indices within each split are ascending.
SplitIndices stratified_split(std::span<const int> y, const SplitSpec& spec);

RawDataset take_rows(const RawDataset& ds, std::span<const std::size_t> rows);
SurvDataset take_rows(const SurvDataset& ds, std::span<const std::size_t> rows);

template <typename Dataset>
  requires requires(const Dataset& d) { d.t; d.y; }
std::array<Dataset, 3> stratified_split(const Dataset& ds, const SplitSpec& spec) {
  const SplitIndices idx = stratified_split(std::span<const int>(ds.y), spec);
  return {take_rows(ds, idx.train), take_rows(ds, idx.valid), take_rows(ds, idx.test)};
}

}  // namespace sfm
