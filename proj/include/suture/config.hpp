#pragma once

// Pipeline configuration: one YAML document with sections mirroring the module
// configs, a global seed and the output root.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "suture/dataset.hpp"
#include "suture/eval.hpp"
#include "suture/geometry.hpp"
#include "suture/nn/model.hpp"
#include "suture/scenegen.hpp"
#include "suture/training.hpp"

namespace suture {

enum class GeometrySource { Predicted, GroundTruth };

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";

  int scene_count = 218;
  SceneGenConfig scene;

  AugmentationConfig augmentation;  // seed is derived, not read
  std::optional<std::filesystem::path> real_dir;
  double real_test_fraction = 0.1;

  nn::ModelConfig model;  // input size follows dataset.target_height x dataset.crop_width
  OptimizerConfig optimizer;
  LossConfig loss;
  EvalOptions eval;
  GeometryConfig geometry;
  GeometrySource geometry_source = GeometrySource::Predicted;

  void validate() const;

  /// Stage seeds derived from the global seed.
  std::uint64_t stage_seed(const char* stage) const;
};

/// Parses YAML text. Unknown keys, wrong types and invalid values raise ValidationError
/// carrying "<source>:<line>:<column>".
PipelineConfig parse_config(const std::string& yaml_text, const std::string& source_name,
                            const std::vector<std::string>& overrides = {});
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});

/// Fully resolved configuration as YAML (every key, defaults included).
std::string config_to_yaml(const PipelineConfig& config);

}  // namespace suture
