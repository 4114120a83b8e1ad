#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "suture/nn/model.hpp"

namespace suture {

struct TrainingMetadata {
  std::string phase = "init";  // init | joint_synthetic | seg_finetune_real
  int epochs = 0;
  std::int64_t steps = 0;
  std::optional<double> final_loss;
  std::uint64_t seed = 0;
  std::vector<std::string> history;  // phases applied so far, oldest first

  bool operator==(const TrainingMetadata&) const = default;
};

struct Checkpoint {
  nn::ModelConfig config;
  nn::ModelParameters<float> params;
  TrainingMetadata meta;

  static Checkpoint initialize(const nn::ModelConfig& config, std::uint64_t seed);
};

/// Container layout: 8-byte magic "SUTCKPT1", little-endian u64 header length, JSON header
/// (config, metadata, parameter index), then raw little-endian float32 values in index order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

bool parameters_equal(const nn::ParameterGroup<float>& a, const nn::ParameterGroup<float>& b);
/// Largest absolute elementwise difference between two groups with the same layout.
double max_abs_diff(const nn::ParameterGroup<float>& a, const nn::ParameterGroup<float>& b);

}  // namespace suture
