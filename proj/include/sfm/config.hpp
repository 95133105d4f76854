#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "sfm/dataset.hpp"
#include "sfm/losses.hpp"
#include "sfm/model.hpp"
#include "sfm/synth.hpp"
#include "sfm/train.hpp"

namespace sfm {

enum class ModelKind { sfm, lognormal };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

/// Bad or missing configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunPaths {
  /// Input CSV; defaults to <out>/data.csv, which is where `simulate` writes.
  std::optional<std::filesystem::path> data;
  std::filesystem::path out = "out";
  /// Defaults to <out>/model.json.
  std::optional<std::filesystem::path> checkpoint;

  std::filesystem::path data_or_default() const { return data ? *data : out / "data.csv"; }
  std::filesystem::path checkpoint_or_default() const {
    return checkpoint ? *checkpoint : out / "model.json";
  }
};

struct SimulateConfig {
  std::size_t n = 4000;
  OracleSpec oracle;
};

struct RunConfig {
  std::uint64_t seed = 0;
  ModelKind model = ModelKind::sfm;
  RunPaths paths;
  /// Empty columns means: every header column except time and event,
  /// read as continuous.
  FeatureSchema schema;
  SplitSpec split;
  SfmConfig sfm;
  LossConfig loss;
  TrainConfig train;
  SimulateConfig simulate;
  std::size_t draws = 200;

  /// Copies `seed` into every component that consumes randomness.
  void propagate_seed();
  void validate() const;
};

/// Relative paths in the file resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& yaml_text,
                           const std::filesystem::path& base_dir = ".");

}  // namespace sfm
