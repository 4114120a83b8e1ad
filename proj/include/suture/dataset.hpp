#pragma once

// Resize / crop augmentation and split management for synthetic and real frames.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <opencv2/core.hpp>

#include "suture/camera.hpp"
#include "suture/manifest.hpp"

namespace suture {

/// In-memory frame. depth (CV_32F, mm) is empty for real frames.
struct Sample {
  std::string id;
  cv::Mat rgb;
  cv::Mat depth;
  cv::Mat seg;
  std::optional<CameraModel> camera;

  int width() const { return rgb.cols; }
  int height() const { return rgb.rows; }
  bool has_depth() const { return !depth.empty(); }
};

Sample load_sample(const SampleRecord& record);

struct AugmentationConfig {
  int target_height = 512;
  int crop_width = 512;
  int crops_per_image = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Aspect-preserving resize: bilinear RGB, nearest-neighbor seg and depth
/// (depth values are copied, never rescaled).
Sample resize_to_height(const Sample& sample, int target_height);

struct Crop {
  Sample sample;
  int offset = 0;
};

/// Crops every map at one x-offset drawn uniformly from [0, width - crop_width].
Crop random_crop_width(const Sample& sample, int crop_width, std::uint64_t seed);
Crop crop_width_at(const Sample& sample, int crop_width, int offset);

/// Pairs <id>_rgb.png with <id>_seg.png under `dir`; ids sorted lexicographically and
/// round(count * test_fraction) of them (seeded choice) assigned to the test split.
Manifest ingest_real_directory(const std::filesystem::path& dir, double test_fraction,
                               std::uint64_t seed);

/// Builds the network-ready corpus in out_dir:
///  - every train parent (synthetic and real) is resized to target_height and cut into
///    crops_per_image random crops (children carry parent_id and crop_offset);
///  - every test record is resized and center-cropped to crop_width, keeping its id.
/// Writes out_dir/manifest.jsonl. Throws ValidationError on split leakage.
Manifest build_training_corpus(const Manifest& synthetic, const std::optional<Manifest>& real,
                               const AugmentationConfig& aug,
                               const std::filesystem::path& out_dir);

}  // namespace suture
