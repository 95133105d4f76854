#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include "sfm/dataset.hpp"
#include "sfm/model.hpp"

namespace sfm {

/// Everything needed to rebuild a trained model and reproduce its inputs.
///
/// Stored as one JSON document:
///   format      "sfm-checkpoint"
///   version     1
///   kind        "sfm" | "lognormal"
///   seed        initialization seed (u64)
///   input_dim   encoded covariate width
///   config      {hidden_units, layers, dropout_p, noise_dim, noise_kind, batchnorm}
///   hidden      per layer {weight, bias, gamma, beta, running_mean, running_var,
///               momentum, eps}
///   heads       sfm: {out_weight, out_bias}
///               lognormal: {mu_weight, mu_bias, sigma_weight, sigma_bias}
///   preprocessor  {medians, modes, means, stds, levels} or null
/// Each tensor is {"rows": r, "cols": c, "data": [row-major values]}; values
/// are written with round-trip precision.
struct Checkpoint {
  std::variant<SfmModel, LognormalModel> model;
  std::optional<Preprocessor> preprocessor;
};

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sfm
