#include "suture/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include <opencv2/imgproc.hpp>

#include "suture/error.hpp"
#include "suture/image_io.hpp"
#include "suture/seed.hpp"

namespace suture {

namespace fs = std::filesystem;

Sample load_sample(const SampleRecord& record) {
  Sample s;
  s.id = record.id;
  s.rgb = read_rgb_png(record.rgb_path);
  s.seg = read_seg_png(record.seg_path);
  if (record.depth_path) s.depth = read_depth_png(*record.depth_path);
  s.camera = record.camera;
  if (s.seg.size() != s.rgb.size() || (s.has_depth() && s.depth.size() != s.rgb.size()))
    throw ValidationError("sample '" + record.id + "': rgb/seg/depth sizes differ");
  return s;
}

void AugmentationConfig::validate() const {
  require(target_height > 0, "dataset: target_height must be positive");
  require(crop_width > 0, "dataset: crop_width must be positive");
  require(crops_per_image >= 0, "dataset: crops_per_image must be >= 0");
}

namespace {

cv::Mat nearest_resize(const cv::Mat& src, int width, int height) {
  // Pixel-center sampling: dst x maps to floor((x + 0.5) * src_w / dst_w).
  cv::Mat dst(height, width, src.type());
  const std::size_t elem = src.elemSize();
  std::vector<int> xs(width);
  for (int x = 0; x < width; ++x)
    xs[x] = std::min(src.cols - 1, static_cast<int>((x + 0.5) * src.cols / width));
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(src.rows - 1, static_cast<int>((y + 0.5) * src.rows / height));
    const std::uint8_t* srow = src.ptr<std::uint8_t>(sy);
    std::uint8_t* drow = dst.ptr<std::uint8_t>(y);
    for (int x = 0; x < width; ++x) std::memcpy(drow + x * elem, srow + xs[x] * elem, elem);
  }
  return dst;
}

}  // namespace

Sample resize_to_height(const Sample& sample, int target_height) {
  require(target_height > 0, "resize_to_height: target_height must be positive");
  require(!sample.rgb.empty() && !sample.seg.empty(), "resize_to_height: sample images not loaded");
  if (sample.height() == target_height) return sample;
  const int width = static_cast<int>(
      std::lround(static_cast<double>(sample.width()) * target_height / sample.height()));
  require(width > 0, "resize_to_height: resulting width is zero");
  Sample out;
  out.id = sample.id;
  cv::resize(sample.rgb, out.rgb, cv::Size(width, target_height), 0, 0, cv::INTER_LINEAR);
  out.seg = nearest_resize(sample.seg, width, target_height);
  if (sample.has_depth()) out.depth = nearest_resize(sample.depth, width, target_height);
  if (sample.camera) out.camera = sample.camera->resized(width, target_height);
  return out;
}

Crop crop_width_at(const Sample& sample, int crop_width, int offset) {
  require(crop_width > 0 && crop_width <= sample.width(),
          "crop: crop_width " + std::to_string(crop_width) + " exceeds image width " +
              std::to_string(sample.width()));
  require(offset >= 0 && offset + crop_width <= sample.width(), "crop: offset out of range");
  const cv::Rect roi(offset, 0, crop_width, sample.height());
  Crop c;
  c.offset = offset;
  c.sample.id = sample.id;
  c.sample.rgb = sample.rgb(roi).clone();
  c.sample.seg = sample.seg(roi).clone();
  if (sample.has_depth()) c.sample.depth = sample.depth(roi).clone();
  if (sample.camera) c.sample.camera = sample.camera->cropped_x(offset, crop_width);
  return c;
}

Crop random_crop_width(const Sample& sample, int crop_width, std::uint64_t seed) {
  require(crop_width > 0 && crop_width <= sample.width(),
          "random_crop_width: crop_width " + std::to_string(crop_width) +
              " exceeds image width " + std::to_string(sample.width()));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> offset(0, sample.width() - crop_width);
  return crop_width_at(sample, crop_width, offset(rng));
}

Manifest ingest_real_directory(const fs::path& dir, double test_fraction, std::uint64_t seed) {
  require(test_fraction >= 0 && test_fraction <= 1, "real data: test_fraction must lie in [0, 1]");
  if (!fs::is_directory(dir)) throw IoError("real data directory not found", dir);
  std::set<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = "_rgb.png";
    if (name.size() > suffix.size() && name.ends_with(suffix))
      ids.insert(name.substr(0, name.size() - suffix.size()));
  }
  std::vector<std::string> sorted(ids.begin(), ids.end());
  const int n_test = static_cast<int>(std::lround(sorted.size() * test_fraction));
  std::vector<std::size_t> order(sorted.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, std::string_view("real-split")));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_test(sorted.size(), false);
  for (int k = 0; k < n_test; ++k) is_test[order[k]] = true;

  Manifest manifest;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    SampleRecord r;
    r.id = "real_" + sorted[i];
    r.rgb_path = fs::absolute(dir / (sorted[i] + "_rgb.png")).lexically_normal();
    r.seg_path = fs::absolute(dir / (sorted[i] + "_seg.png")).lexically_normal();
    if (!fs::exists(r.seg_path)) throw IoError("real frame has no segmentation", r.seg_path);
    r.split = is_test[i] ? Split::Test : Split::Train;
    r.provenance = Provenance::Real;
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

namespace {

SampleRecord write_sample(const Sample& s, const std::string& id, const fs::path& frames,
                          const SampleRecord& parent) {
  SampleRecord r;
  r.id = id;
  r.rgb_path = fs::absolute(frames / (id + "_rgb.png")).lexically_normal();
  r.seg_path = fs::absolute(frames / (id + "_seg.png")).lexically_normal();
  write_rgb_png(r.rgb_path, s.rgb);
  write_seg_png(r.seg_path, s.seg);
  if (s.has_depth()) {
    r.depth_path = fs::absolute(frames / (id + "_depth.png")).lexically_normal();
    write_depth_png(*r.depth_path, s.depth);
  }
  r.pose_path = parent.pose_path;
  r.provenance = parent.provenance;
  r.camera = s.camera;
  r.seed = parent.seed;
  return r;
}

}  // namespace

Manifest build_training_corpus(const Manifest& synthetic, const std::optional<Manifest>& real,
                               const AugmentationConfig& aug, const fs::path& out_dir) {
  aug.validate();
  std::vector<const SampleRecord*> inputs;
  for (const auto& r : synthetic.records) inputs.push_back(&r);
  if (real)
    for (const auto& r : real->records) inputs.push_back(&r);

  std::unordered_set<std::string> test_ids;
  std::unordered_set<std::string> seen;
  for (const auto* r : inputs) {
    if (!seen.insert(r->id).second) throw ValidationError("duplicate sample id '" + r->id + "'");
    if (r->split == Split::Test) test_ids.insert(r->id);
  }
  for (const auto* r : inputs) {
    if (r->split == Split::Test && r->lineage)
      throw ValidationError("split leakage: test record '" + r->id +
                            "' is an augmentation child");
    if (r->lineage && test_ids.count(r->lineage->parent_id))
      throw ValidationError("split leakage: '" + r->id + "' descends from test sample '" +
                            r->lineage->parent_id + "'");
  }

  const fs::path frames = out_dir / "frames";
  std::error_code ec;
  fs::create_directories(frames, ec);
  if (ec) throw IoError("cannot create output directory (" + ec.message() + ")", frames);

  Manifest out;
  std::uint64_t parent_index = 0;
  for (const auto* parent : inputs) {
    const Sample resized = resize_to_height(load_sample(*parent), aug.target_height);
    if (parent->split == Split::Test) {
      require(aug.crop_width <= resized.width(), "dataset: crop_width exceeds resized width of '" +
                                                     parent->id + "'");
      const Crop c =
          crop_width_at(resized, aug.crop_width, (resized.width() - aug.crop_width) / 2);
      SampleRecord r = write_sample(c.sample, parent->id, frames, *parent);
      r.split = Split::Test;
      out.records.push_back(std::move(r));
      continue;
    }
    for (int k = 0; k < aug.crops_per_image; ++k) {
      const std::uint64_t seed = derive_seed(derive_seed(aug.seed, parent_index),
                                             static_cast<std::uint64_t>(k));
      const Crop c = random_crop_width(resized, aug.crop_width, seed);
      SampleRecord r = write_sample(c.sample, parent->id + "_c" + std::to_string(k), frames,
                                    *parent);
      r.split = Split::Train;
      r.lineage = Lineage{parent->id, c.offset};
      out.records.push_back(std::move(r));
    }
    ++parent_index;
  }
  check_split_integrity(out);
  write_manifest(out_dir / "manifest.jsonl", out);
  return out;
}

}  // namespace suture
