#pragma once

// Procedural virtual suturing scene: a half-circle needle, a needle holder and a
// silicone pad, rendered by sphere tracing exact signed distance fields so that
// depth and segmentation ground truth are pixel-exact.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include "suture/camera.hpp"
#include "suture/error.hpp"
#include "suture/manifest.hpp"
#include "suture/rigid.hpp"

namespace suture {

enum SegClass : std::uint8_t { kBackground = 0, kNeedle = 1, kInstrument = 2 };
inline constexpr int kNumClasses = 3;

/// Needle body: circular arc in its local xy-plane, tip at angle 0, tail at arc_angle().
struct NeedleSpec {
  double circle_radius = 8.0;  // mm
  double wire_radius = 0.4;    // mm
  double arc_fraction = 0.5;   // half-circle

  void validate() const;
  double arc_angle() const { return arc_fraction * 2.0 * kPi; }
};

/// Needle holder in its local frame: jaw tip at the origin, shaft along +x.
struct InstrumentSpec {
  double shaft_radius = 2.5;
  double shaft_length = 80.0;
  double jaw_length = 10.0;
  double jaw_opening_angle = 10.0;  // degrees, full opening

  void validate() const;
  double jaw_radius() const { return 0.45 * shaft_radius; }
};

/// Pad local frame: top surface is z = 0, body occupies z in [-thickness, 0].
struct PadSpec {
  double extent_x = 90.0;
  double extent_y = 70.0;
  double thickness = 10.0;
  Eigen::Vector3d wound_start{-25.0, 0.0, 0.0};
  Eigen::Vector3d wound_end{25.0, 0.0, 0.0};

  void validate() const;
};

struct SceneSpecs {
  NeedleSpec needle;
  InstrumentSpec instrument;
  PadSpec pad;

  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Perturbation applied on top of an object's canonical pose: rotation by
/// Z-Y-X Euler angles about the object's own origin, then a world translation.
struct PoseRange {
  std::array<Interval, 3> euler_deg{};
  std::array<Interval, 3> translation_mm{};
};

struct RandomizationConfig {
  PoseRange camera{{{{-6, 6}, {-6, 6}, {-10, 10}}}, {{{-8, 8}, {-8, 8}, {-8, 8}}}};
  PoseRange needle{{{{-15, 15}, {-15, 15}, {-20, 20}}}, {{{-6, 6}, {-6, 6}, {-3, 3}}}};
  PoseRange instrument{{{{-15, 15}, {-15, 15}, {-15, 15}}}, {{{-4, 4}, {-4, 4}, {-2, 2}}}};
  PoseRange pad{{{{0, 0}, {0, 0}, {-10, 10}}}, {{{-5, 5}, {-5, 5}, {0, 0}}}};
  Interval light_azimuth_deg{0.0, 360.0};
  Interval light_elevation_deg{40.0, 80.0};
  double noise_sigma = 0.02;  // additive Gaussian, RGB in [0, 1]
  double grasp_probability = 0.8;
  Interval grasp_fraction{0.45, 0.85};
  Interval grasp_tilt_deg{-20.0, 20.0};
  Eigen::Vector3d free_offset_mm{18.0, 10.0, 8.0};
  std::uint64_t seed = 0;
  int max_retries = 200;

  void validate() const;

  /// Same settings with every pose, light and grasp interval collapsed to its lower end
  /// and no sensor noise; build_scene then always returns the canonical pose.
  RandomizationConfig fixed() const;
};

/// Poses of every scene object relative to the world (pad top surface is world z = 0)
/// plus the camera-to-world pose.
struct ScenePose {
  RigidTransform camera;
  RigidTransform pad;
  RigidTransform needle;
  RigidTransform instrument;
  Eigen::Vector3d light_dir = Eigen::Vector3d(0, 0, 1);  // world, toward the light
  bool needle_present = true;
  bool instrument_present = true;
  bool grasped = false;
  double grasp_fraction = 0.0;  // arc fraction from the needle tip when grasped
  std::uint64_t seed = 0;

  bool operator==(const ScenePose&) const = default;
};

class SceneError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

/// Canonical arrangement: camera above the pad looking down obliquely, needle
/// about 20 mm above the pad with its tip lowest, holder grasping at `grasp_fraction`
/// (or displaced by rand.free_offset_mm when not grasped).
ScenePose canonical_pose(const SceneSpecs& specs, const RandomizationConfig& rand,
                         bool grasped, double grasp_fraction, double grasp_tilt_deg = 0.0);

/// Samples a scene pose; deterministic given seed. Throws SceneError when no
/// collision-free, visible arrangement is found within rand.max_retries.
ScenePose build_scene(const SceneSpecs& specs, const CameraModel& camera,
                      const RandomizationConfig& rand, std::uint64_t seed);

/// Scene signed distance field evaluated in camera coordinates.
class SceneSdf {
 public:
  enum Object : int { kPad = 0, kNeedleObject = 1, kInstrumentObject = 2 };

  SceneSdf(const ScenePose& poses, const SceneSpecs& specs);

  double distance(Object object, const Eigen::Vector3d& p_cam) const;
  bool present(Object object) const { return present_[object]; }

  struct Nearest {
    double distance;
    Object object;
  };
  Nearest nearest(const Eigen::Vector3d& p_cam) const;

  /// Lower bound of the scene distance; exact below `cutoff`.
  Nearest nearest_bounded(const Eigen::Vector3d& p_cam) const;

  Eigen::Vector3d normal(Object object, const Eigen::Vector3d& p_cam) const;

  /// Point expressed in the pad's local frame.
  Eigen::Vector3d to_pad(const Eigen::Vector3d& p_cam) const;

 private:
  SceneSpecs specs_;
  std::array<Eigen::Matrix3d, 3> rot_;    // camera -> local
  std::array<Eigen::Vector3d, 3> trans_;  // camera -> local
  std::array<Eigen::Vector3d, 3> bound_center_;  // camera frame
  std::array<double, 3> bound_radius_{};
  std::array<bool, 3> present_{};
};

inline SegClass seg_class_of(SceneSdf::Object object) {
  switch (object) {
    case SceneSdf::kNeedleObject: return kNeedle;
    case SceneSdf::kInstrumentObject: return kInstrument;
    default: return kBackground;
  }
}

struct RenderOptions {
  double march_tolerance = 1e-3;  // mm
  int max_steps = 256;
};

/// One rendered frame. rgb is CV_8UC3 in RGB order, depth CV_32F z-depth in mm
/// (0 where no surface is hit), seg CV_8U class ids.
struct RenderSample {
  cv::Mat rgb;
  cv::Mat depth;
  cv::Mat seg;
  CameraModel camera;
  ScenePose poses;
  std::uint64_t seed = 0;
};

RenderSample render(const ScenePose& poses, const CameraModel& camera, const SceneSpecs& specs,
                    const RandomizationConfig& rand, const RenderOptions& options = {});

struct SceneGenConfig {
  SceneSpecs specs;
  CameraModel camera;
  RandomizationConfig randomization;
  RenderOptions render;
  double test_fraction = 21.0 / 218.0;

  void validate() const;
};

/// Renders n frames into out_dir/frames and writes out_dir/manifest.jsonl.
/// Frame i uses derive_seed(randomization.seed, i); round(n * test_fraction)
/// frames are assigned to the test split.
Manifest generate_dataset(int n, const SceneGenConfig& config,
                          const std::filesystem::path& out_dir);

/// Pose sidecar written next to every synthetic frame.
void write_pose_json(const std::filesystem::path& path, const ScenePose& pose);
ScenePose read_pose_json(const std::filesystem::path& path);

}  // namespace suture
