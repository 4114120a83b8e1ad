#pragma once

// JSON-lines sample index shared by the generator, the dataset preparation and
// the training / evaluation stages.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "suture/camera.hpp"

namespace suture {

enum class Split { Train, Test };
enum class Provenance { Synthetic, Real };

std::string to_string(Split split);
std::string to_string(Provenance provenance);

struct Lineage {
  std::string parent_id;
  int crop_offset = 0;

  bool operator==(const Lineage&) const = default;
};

/// Paths are absolute in memory; written relative to the manifest's directory.
struct SampleRecord {
  std::string id;
  std::filesystem::path rgb_path;
  std::filesystem::path seg_path;
  std::optional<std::filesystem::path> depth_path;
  std::optional<std::filesystem::path> pose_path;
  Split split = Split::Train;
  Provenance provenance = Provenance::Synthetic;
  std::optional<CameraModel> camera;
  std::optional<std::uint64_t> seed;
  std::optional<Lineage> lineage;

  bool operator==(const SampleRecord&) const = default;
};

struct Manifest {
  std::vector<SampleRecord> records;

  std::vector<SampleRecord> select(Split split) const;
  std::size_t count(Split split) const;
};

nlohmann::json camera_to_json(const CameraModel& camera);
CameraModel camera_from_json(const nlohmann::json& j);

nlohmann::json record_to_json(const SampleRecord& record, const std::filesystem::path& base_dir);
SampleRecord record_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Throws ValidationError (with line number) on malformed records, IoError on I/O.
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Every augmentation child must descend from a train-split parent and ids must be unique.
/// Throws ValidationError on leakage.
void check_split_integrity(const Manifest& manifest);

}  // namespace suture
