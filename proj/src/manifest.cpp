#include "suture/manifest.hpp"

#include <fstream>
#include <set>
#include <unordered_map>

#include "suture/error.hpp"

namespace suture {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split split) { return split == Split::Train ? "train" : "test"; }

std::string to_string(Provenance provenance) {
  return provenance == Provenance::Synthetic ? "synthetic" : "real";
}

namespace {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw ValidationError("unknown split '" + s + "'");
}

Provenance parse_provenance(const std::string& s) {
  if (s == "synthetic") return Provenance::Synthetic;
  if (s == "real") return Provenance::Real;
  throw ValidationError("unknown provenance '" + s + "'");
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.generic_string();
  const fs::path rel = p.lexically_relative(base);
  return rel.empty() ? p.generic_string() : rel.generic_string();
}

fs::path resolve(const std::string& p, const fs::path& base) {
  const fs::path path(p);
  if (path.is_absolute() || base.empty()) return path.lexically_normal();
  return (base / path).lexically_normal();
}

}  // namespace

std::vector<SampleRecord> Manifest::select(Split split) const {
  std::vector<SampleRecord> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(r);
  return out;
}

std::size_t Manifest::count(Split split) const {
  std::size_t n = 0;
  for (const auto& r : records) n += (r.split == split);
  return n;
}

json camera_to_json(const CameraModel& c) {
  return json{{"width", c.width}, {"height", c.height}, {"fx", c.fx}, {"fy", c.fy},
              {"cx", c.cx},       {"cy", c.cy},         {"near", c.near}, {"far", c.far}};
}

CameraModel camera_from_json(const json& j) {
  CameraModel c;
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.near = j.at("near").get<double>();
  c.far = j.at("far").get<double>();
  return c;
}

json record_to_json(const SampleRecord& r, const fs::path& base_dir) {
  json j;
  j["id"] = r.id;
  j["rgb_path"] = relative_to(r.rgb_path, base_dir);
  j["seg_path"] = relative_to(r.seg_path, base_dir);
  j["depth_path"] = r.depth_path ? json(relative_to(*r.depth_path, base_dir)) : json(nullptr);
  if (r.pose_path) j["pose_path"] = relative_to(*r.pose_path, base_dir);
  j["split"] = to_string(r.split);
  j["provenance"] = to_string(r.provenance);
  if (r.camera) j["camera"] = camera_to_json(*r.camera);
  if (r.seed) j["seed"] = *r.seed;
  if (r.lineage) j["lineage"] = {{"parent_id", r.lineage->parent_id},
                                 {"crop_offset", r.lineage->crop_offset}};
  return j;
}

SampleRecord record_from_json(const json& j, const fs::path& base_dir) {
  SampleRecord r;
  r.id = j.at("id").get<std::string>();
  r.rgb_path = resolve(j.at("rgb_path").get<std::string>(), base_dir);
  r.seg_path = resolve(j.at("seg_path").get<std::string>(), base_dir);
  if (j.contains("depth_path") && !j["depth_path"].is_null())
    r.depth_path = resolve(j["depth_path"].get<std::string>(), base_dir);
  if (j.contains("pose_path")) r.pose_path = resolve(j["pose_path"].get<std::string>(), base_dir);
  r.split = parse_split(j.at("split").get<std::string>());
  r.provenance = parse_provenance(j.at("provenance").get<std::string>());
  if (j.contains("camera")) r.camera = camera_from_json(j["camera"]);
  if (j.contains("seed")) r.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("lineage")) {
    r.lineage = Lineage{j["lineage"].at("parent_id").get<std::string>(),
                        j["lineage"].at("crop_offset").get<int>()};
  }
  if (r.provenance == Provenance::Synthetic && !r.depth_path)
    throw ValidationError("synthetic record '" + r.id + "' has no depth_path");
  return r;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest", path);
  const fs::path base = fs::absolute(path).parent_path();
  Manifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      manifest.records.push_back(record_from_json(json::parse(line), base));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return manifest;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  const fs::path base = fs::absolute(path).parent_path();
  if (!base.empty()) fs::create_directories(base);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest", path);
  for (const auto& r : manifest.records) out << record_to_json(r, base).dump() << '\n';
  if (!out) throw IoError("error while writing manifest", path);
}

void check_split_integrity(const Manifest& manifest) {
  std::unordered_map<std::string, Split> split_of;
  for (const auto& r : manifest.records) {
    auto [it, inserted] = split_of.emplace(r.id, r.split);
    if (!inserted) throw ValidationError("duplicate sample id '" + r.id + "'");
  }
  for (const auto& r : manifest.records) {
    if (!r.lineage) continue;
    if (r.split == Split::Test)
      throw ValidationError("split leakage: test record '" + r.id + "' is an augmentation child");
    auto parent = split_of.find(r.lineage->parent_id);
    if (parent != split_of.end() && parent->second == Split::Test)
      throw ValidationError("split leakage: '" + r.id + "' is derived from test sample '" +
                            r.lineage->parent_id + "'");
  }
}

}  // namespace suture
