#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "suture/error.hpp"
#include "suture/image_io.hpp"
#include "suture/scenegen.hpp"
#include "test_support.hpp"

using namespace suture;
using suture::testing::TempDir;
using Eigen::Vector3d;

namespace {

RandomizationConfig quiet() {
  RandomizationConfig r = RandomizationConfig{}.fixed();
  r.grasp_probability = 1.0;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(BuildScene, ZeroWidthRangesGiveCanonicalPose) {
  SceneSpecs specs;
  const RandomizationConfig r = quiet();
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    ScenePose expected = canonical_pose(specs, r, true, r.grasp_fraction.lo, 0.0);
    expected.seed = seed;
    EXPECT_EQ(build_scene(specs, CameraModel{}, r, seed), expected) << "seed " << seed;
  }
}

TEST(BuildScene, SameSeedSamePose) {
  SceneSpecs specs;
  RandomizationConfig r;
  EXPECT_EQ(build_scene(specs, CameraModel{}, r, 1234), build_scene(specs, CameraModel{}, r, 1234));
  EXPECT_FALSE(build_scene(specs, CameraModel{}, r, 1234) ==
               build_scene(specs, CameraModel{}, r, 1235));
}

TEST(BuildScene, QuaternionsAreUnit) {
  SceneSpecs specs;
  RandomizationConfig r;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ScenePose p = build_scene(specs, CameraModel{}, r, seed);
    for (const RigidTransform* t : {&p.camera, &p.pad, &p.needle, &p.instrument})
      EXPECT_NEAR(t->rotation.norm(), 1.0, 1e-9);
  }
}

TEST(BuildScene, TranslationSamplesAverageToRangeCenter) {
  // Camera translation does not interact with the rejection tests, so the sample
  // mean estimates the mean of U(-10, 10) directly (standard error ~0.18 mm).
  SceneSpecs specs;
  RandomizationConfig r = quiet();
  for (auto& i : r.camera.translation_mm) i = {-10.0, 10.0};
  const Vector3d base = canonical_pose(specs, r, true, r.grasp_fraction.lo).camera.translation;
  Vector3d sum = Vector3d::Zero();
  for (std::uint64_t seed = 0; seed < 1000; ++seed)
    sum += build_scene(specs, CameraModel{}, r, seed).camera.translation - base;
  const Vector3d mean = sum / 1000.0;
  for (int k = 0; k < 3; ++k) EXPECT_LT(std::abs(mean(k)), 1.0) << "axis " << k;
}

TEST(BuildScene, GraspedAndFreePlacementsBothOccur) {
  SceneSpecs specs;
  RandomizationConfig r;
  int grasped = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    grasped += build_scene(specs, CameraModel{}, r, seed).grasped;
  EXPECT_GT(grasped, 120);
  EXPECT_LT(grasped, 195);
}

TEST(BuildScene, ImpossibleRangesRaiseSceneError) {
  SceneSpecs specs;
  RandomizationConfig r = quiet();
  r.needle.translation_mm[2] = {-40.0, -40.0};  // needle buried in the pad
  r.max_retries = 5;
  EXPECT_THROW(build_scene(specs, CameraModel{}, r, 0), SceneError);
}

TEST(Specs, InvalidValuesRejected) {
  NeedleSpec n;
  n.wire_radius = 9.0;
  EXPECT_THROW(n.validate(), ValidationError);
  InstrumentSpec i;
  i.jaw_opening_angle = 50.0;
  EXPECT_THROW(i.validate(), ValidationError);
  PadSpec p;
  p.wound_start.z() = 1.0;
  EXPECT_THROW(p.validate(), ValidationError);
  RandomizationConfig r;
  r.noise_sigma = -1.0;
  EXPECT_THROW(r.validate(), ValidationError);
}

TEST(Render, FrontoParallelPadGivesConstantDepth) {
  SceneSpecs specs;
  specs.pad.extent_x = specs.pad.extent_y = 2000.0;
  const CameraModel cam = suture::testing::small_camera();
  ScenePose pose = suture::testing::empty_pose();
  pose.pad = suture::testing::facing_camera({0, 0, 100});
  const RenderSample s = render(pose, cam, specs, quiet());
  double max_err = 0.0;
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u) {
      max_err = std::max(max_err, std::abs(s.depth.at<float>(v, u) - 100.0));
      ASSERT_EQ(s.seg.at<std::uint8_t>(v, u), 0);
    }
  EXPECT_LE(max_err, 2e-3);
}

TEST(Render, TorusNearestDepthIsCenterMinusWireRadius) {
  // Circle plane orthogonal to the optical axis: the nearest needle surface point
  // is the crest of the wire, at 120 - 0.5 mm.
  SceneSpecs specs;
  specs.needle.wire_radius = 0.5;
  const CameraModel cam;
  ScenePose pose = suture::testing::empty_pose();
  pose.needle_present = true;
  pose.needle.translation = Vector3d(0, 0, 120);
  const RenderSample s = render(pose, cam, specs, quiet());
  double nearest = 1e9;
  int needle_pixels = 0;
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u)
      if (s.seg.at<std::uint8_t>(v, u) == kNeedle) {
        nearest = std::min<double>(nearest, s.depth.at<float>(v, u));
        ++needle_pixels;
      }
  ASSERT_GT(needle_pixels, 100);
  EXPECT_NEAR(nearest, 119.5, 2e-3);
}

TEST(Render, NearestSurfaceWinsUnderOcclusion) {
  SceneSpecs specs;
  const CameraModel cam;
  ScenePose pose = suture::testing::empty_pose();
  pose.needle_present = true;
  pose.needle.translation = Vector3d(0, 0, 120);
  pose.instrument_present = true;
  pose.instrument.translation = Vector3d(-40, 0, 80);  // shaft crosses the optical axis
  const double a = deg2rad(5.0);
  const Eigen::Vector2d px = cam.project(Vector3d(8 * std::cos(a), 8 * std::sin(a), 120));
  const int u = static_cast<int>(std::lround(px.x())), v = static_cast<int>(std::lround(px.y()));

  const RenderSample occluded = render(pose, cam, specs, quiet());
  EXPECT_EQ(occluded.seg.at<std::uint8_t>(v, u), kInstrument);
  EXPECT_LT(occluded.depth.at<float>(v, u), 90.0f);

  pose.instrument_present = false;
  const RenderSample open = render(pose, cam, specs, quiet());
  EXPECT_EQ(open.seg.at<std::uint8_t>(v, u), kNeedle);
  EXPECT_NEAR(open.depth.at<float>(v, u), 120.0, 0.6);
}

TEST(Render, NoiseTouchesRgbOnly) {
  SceneSpecs specs;
  const CameraModel cam = suture::testing::small_camera(200, 150, 250.0);
  RandomizationConfig noisy;
  const ScenePose pose = build_scene(specs, cam, noisy, 17);
  const RenderSample a = render(pose, cam, specs, noisy);
  RandomizationConfig clean = noisy;
  clean.noise_sigma = 0.0;
  const RenderSample b = render(pose, cam, specs, clean);
  EXPECT_EQ(cv::norm(a.depth, b.depth, cv::NORM_INF), 0.0);
  EXPECT_EQ(cv::norm(a.seg, b.seg, cv::NORM_INF), 0.0);
  EXPECT_GT(cv::norm(a.rgb, b.rgb, cv::NORM_L1), 0.0);
}

TEST(Render, Deterministic) {
  SceneSpecs specs;
  const CameraModel cam = suture::testing::small_camera(200, 150, 250.0);
  RandomizationConfig r;
  const ScenePose pose = build_scene(specs, cam, r, 5);
  const RenderSample a = render(pose, cam, specs, r);
  const RenderSample b = render(pose, cam, specs, r);
  EXPECT_EQ(cv::norm(a.rgb, b.rgb, cv::NORM_INF), 0.0);
  EXPECT_EQ(cv::norm(a.depth, b.depth, cv::NORM_INF), 0.0);
  EXPECT_EQ(cv::norm(a.seg, b.seg, cv::NORM_INF), 0.0);
}

TEST(Render, HitPixelsLieOnTheSurfaceOfTheirClass) {
  // Brute-force probe every 8th pixel: the back-projected point sits on the zero set of
  // the scene SDF and the object nearest to it is the labelled class.
  SceneSpecs specs;
  const CameraModel cam;
  RandomizationConfig r;
  RenderOptions opt;
  for (std::uint64_t seed : {3ull, 4ull}) {
    const ScenePose pose = build_scene(specs, cam, r, seed);
    const RenderSample s = render(pose, cam, specs, r, opt);
    const SceneSdf sdf(pose, specs);
    int hits = 0, good = 0;
    for (int v = 0; v < cam.height; v += 8)
      for (int u = 0; u < cam.width; u += 8) {
        const float z = s.depth.at<float>(v, u);
        if (z <= 0.0f) continue;
        ++hits;
        const Vector3d p = cam.backproject(u, v, z);
        const SceneSdf::Nearest n = sdf.nearest(p);
        good += std::abs(n.distance) <= 2 * opt.march_tolerance &&
                seg_class_of(n.object) == s.seg.at<std::uint8_t>(v, u);
      }
    ASSERT_GT(hits, 100);
    EXPECT_GE(static_cast<double>(good) / hits, 0.999) << "seed " << seed;
  }
}

TEST(Render, EveryLabelledPixelHasDepthInsideClipRange) {
  SceneSpecs specs;
  const CameraModel cam = suture::testing::small_camera(320, 240, 400.0);
  RandomizationConfig r;
  const RenderSample s = render(build_scene(specs, cam, r, 8), cam, specs, r);
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u) {
      const int c = s.seg.at<std::uint8_t>(v, u);
      ASSERT_LE(c, 2);
      if (c != 0) {
        const float z = s.depth.at<float>(v, u);
        ASSERT_GT(z, cam.near);
        ASSERT_LT(z, cam.far);
      }
    }
}

TEST(PoseJson, RoundTripIsExact) {
  TempDir dir("pose");
  const ScenePose pose = build_scene(SceneSpecs{}, CameraModel{}, RandomizationConfig{}, 21);
  write_pose_json(dir / "p.json", pose);
  EXPECT_EQ(read_pose_json(dir / "p.json"), pose);
}

TEST(GenerateDataset, SingleFrameRoundTrips) {
  TempDir dir("gen1");
  SceneGenConfig cfg;
  cfg.camera = suture::testing::small_camera(200, 150, 250.0);
  const Manifest m = generate_dataset(1, cfg, dir.path());
  ASSERT_EQ(m.records.size(), 1u);
  const SampleRecord& r = m.records[0];
  ASSERT_TRUE(std::filesystem::exists(r.rgb_path));
  ASSERT_TRUE(std::filesystem::exists(*r.depth_path));
  ASSERT_TRUE(std::filesystem::exists(r.seg_path));
  ASSERT_TRUE(std::filesystem::exists(*r.pose_path));
  EXPECT_EQ(read_manifest(dir / "manifest.jsonl").records, m.records);

  const ScenePose pose = read_pose_json(*r.pose_path);
  const RenderSample s = render(pose, cfg.camera, cfg.specs, cfg.randomization, cfg.render);
  EXPECT_EQ(cv::norm(read_rgb_png(r.rgb_path), s.rgb, cv::NORM_INF), 0.0);
  EXPECT_EQ(cv::norm(read_seg_png(r.seg_path), s.seg, cv::NORM_INF), 0.0);
  EXPECT_EQ(cv::norm(read_depth_png(*r.depth_path), quantize_depth(s.depth), cv::NORM_INF), 0.0);
}

TEST(GenerateDataset, TwoRunsAreByteIdentical) {
  TempDir a("gen_a"), b("gen_b");
  SceneGenConfig cfg;
  cfg.camera = suture::testing::small_camera(120, 90, 150.0);
  generate_dataset(4, cfg, a.path());
  generate_dataset(4, cfg, b.path());
  EXPECT_EQ(slurp(a / "manifest.jsonl"), slurp(b / "manifest.jsonl"));
  for (const char* leaf : {"frames/000003_rgb.png", "frames/000003_depth.png",
                           "frames/000003_seg.png", "frames/000003_pose.json"})
    EXPECT_EQ(slurp(a / leaf), slurp(b / leaf)) << leaf;
}

TEST(GenerateDataset, DefaultSplitHoldsOut21Of218) {
  TempDir dir("gen218");
  SceneGenConfig cfg;
  cfg.camera = suture::testing::small_camera(64, 48, 80.0);
  const Manifest m = generate_dataset(218, cfg, dir.path());
  EXPECT_EQ(m.records.size(), 218u);
  EXPECT_EQ(m.count(Split::Test), 21u);
  EXPECT_EQ(m.count(Split::Train), 197u);
}

TEST(GenerateDataset, RejectsNonPositiveCount) {
  TempDir dir("gen0");
  EXPECT_THROW(generate_dataset(0, SceneGenConfig{}, dir.path()), ValidationError);
}
