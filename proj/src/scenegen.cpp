#include "suture/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "suture/error.hpp"
#include "suture/image_io.hpp"
#include "suture/sdf.hpp"
#include "suture/seed.hpp"

namespace suture {

namespace fs = std::filesystem;
using Eigen::Vector3d;

void NeedleSpec::validate() const {
  require(wire_radius > 0 && circle_radius > wire_radius,
          "needle: need circle_radius > wire_radius > 0");
  require(arc_fraction > 0 && arc_fraction <= 1, "needle: arc_fraction must lie in (0, 1]");
}

void InstrumentSpec::validate() const {
  require(shaft_radius > 0 && shaft_length > 0 && jaw_length > 0,
          "instrument: all lengths must be positive");
  require(jaw_opening_angle >= 0 && jaw_opening_angle <= 45,
          "instrument: jaw_opening_angle must lie in [0, 45] degrees");
}

void PadSpec::validate() const {
  require(extent_x > 0 && extent_y > 0 && thickness > 0, "pad: extents must be positive");
  require(std::abs(wound_start.z()) < 1e-9 && std::abs(wound_end.z()) < 1e-9,
          "pad: wound_line endpoints must lie on the top surface (z = 0)");
}

void SceneSpecs::validate() const {
  needle.validate();
  instrument.validate();
  pad.validate();
}

namespace {

void check_interval(const Interval& i, const char* what) {
  require(i.lo <= i.hi, std::string("randomization: interval ") + what + " has lo > hi");
}

void check_range(const PoseRange& r, const char* what) {
  for (const auto& i : r.euler_deg) check_interval(i, what);
  for (const auto& i : r.translation_mm) check_interval(i, what);
}

}  // namespace

void RandomizationConfig::validate() const {
  check_range(camera, "camera");
  check_range(needle, "needle");
  check_range(instrument, "instrument");
  check_range(pad, "pad");
  check_interval(light_azimuth_deg, "light_azimuth_deg");
  check_interval(light_elevation_deg, "light_elevation_deg");
  check_interval(grasp_fraction, "grasp_fraction");
  check_interval(grasp_tilt_deg, "grasp_tilt_deg");
  require(noise_sigma >= 0, "randomization: noise_sigma must be >= 0");
  require(grasp_probability >= 0 && grasp_probability <= 1,
          "randomization: grasp_probability must lie in [0, 1]");
  require(grasp_fraction.lo >= 0 && grasp_fraction.hi <= 1,
          "randomization: grasp_fraction must lie in [0, 1]");
  require(max_retries > 0, "randomization: max_retries must be positive");
}

RandomizationConfig RandomizationConfig::fixed() const {
  RandomizationConfig out = *this;
  auto collapse = [](Interval& i) { i.hi = i.lo; };
  for (PoseRange* r : {&out.camera, &out.needle, &out.instrument, &out.pad}) {
    for (auto& i : r->euler_deg) i = {};
    for (auto& i : r->translation_mm) i = {};
  }
  collapse(out.light_azimuth_deg);
  collapse(out.light_elevation_deg);
  collapse(out.grasp_fraction);
  out.grasp_tilt_deg = {};
  out.noise_sigma = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Canonical arrangement

namespace {

const Vector3d kCameraEye(0.0, -70.0, 105.0);
const Vector3d kCameraTarget(0.0, 0.0, 12.0);
const Vector3d kNeedleCenter(0.0, 0.0, 20.0);
constexpr double kNeedleViewAngleDeg = 50.0;  // between needle normal and the view ray
constexpr double kNeedleTipDropDeg = -25.0;   // in-plane roll that puts the tip lowest

RigidTransform canonical_needle() {
  const Vector3d to_camera = (kCameraEye - kCameraTarget).normalized();
  const double a = deg2rad(kNeedleViewAngleDeg);
  const Vector3d normal =
      (std::cos(a) * to_camera + std::sin(a) * Vector3d::UnitX()).normalized();
  const Vector3d up = (Vector3d::UnitZ() - Vector3d::UnitZ().dot(normal) * normal).normalized();
  const Vector3d x0 = up.cross(normal);
  const double b = deg2rad(kNeedleTipDropDeg);
  const Vector3d x = std::cos(b) * x0 + std::sin(b) * up;
  const Vector3d y = normal.cross(x);
  RigidTransform t;
  t.rotation = quaternion_from_axes(x, y, normal);
  t.translation = kNeedleCenter;
  return t;
}

/// Holder pose gripping the needle at arc fraction f, shaft tilted about the arc tangent.
RigidTransform grasping_instrument(const RigidTransform& needle, const NeedleSpec& ns,
                                   const InstrumentSpec& is, double f, double tilt_deg) {
  const double phi = f * ns.arc_angle();
  const Vector3d radial_l(std::cos(phi), std::sin(phi), 0.0);
  const Vector3d tangent_l(-std::sin(phi), std::cos(phi), 0.0);
  const Vector3d grasp = needle.apply(ns.circle_radius * radial_l);
  const Vector3d radial = needle.rotate(radial_l);
  const Vector3d tangent = needle.rotate(tangent_l);
  const Vector3d normal = needle.rotate(Vector3d::UnitZ());
  const double t = deg2rad(tilt_deg);
  const Vector3d axis = (std::cos(t) * normal + std::sin(t) * radial).normalized();
  RigidTransform inst;
  inst.rotation = quaternion_from_axes(axis, tangent, axis.cross(tangent));
  inst.translation = grasp - is.jaw_radius() * axis;
  return inst;
}

RigidTransform perturb(const RigidTransform& base, const Vector3d& euler_deg,
                       const Vector3d& translation) {
  RigidTransform out;
  out.rotation =
      (base.rotation * quaternion_from_euler_deg(euler_deg.x(), euler_deg.y(), euler_deg.z()))
          .normalized();
  out.translation = base.translation + translation;
  return out;
}

Vector3d light_direction(double azimuth_deg, double elevation_deg) {
  const double az = deg2rad(azimuth_deg);
  const double el = deg2rad(elevation_deg);
  return Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
}

double mid(const Interval& i) { return 0.5 * (i.lo + i.hi); }

}  // namespace

ScenePose canonical_pose(const SceneSpecs& specs, const RandomizationConfig& rand, bool grasped,
                         double grasp_fraction, double grasp_tilt_deg) {
  ScenePose pose;
  pose.camera = look_at(kCameraEye, kCameraTarget, Vector3d::UnitZ());
  pose.needle = canonical_needle();
  pose.grasped = grasped;
  if (grasped) {
    pose.grasp_fraction = grasp_fraction;
    pose.instrument = grasping_instrument(pose.needle, specs.needle, specs.instrument,
                                          grasp_fraction, grasp_tilt_deg);
  } else {
    pose.instrument = grasping_instrument(pose.needle, specs.needle, specs.instrument,
                                          grasp_fraction, grasp_tilt_deg);
    pose.instrument.translation += rand.free_offset_mm;
  }
  pose.light_dir = light_direction(rand.light_azimuth_deg.lo, rand.light_elevation_deg.lo);
  return pose;
}

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(const Interval& i) { return i.lo + (i.hi - i.lo) * unit_(rng_); }
  Vector3d uniform3(const std::array<Interval, 3>& r) {
    const double a = uniform(r[0]);
    const double b = uniform(r[1]);
    const double c = uniform(r[2]);
    return {a, b, c};
  }
  bool bernoulli(double p) { return unit_(rng_) < p; }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

double pad_distance(const ScenePose& pose, const PadSpec& pad, const Vector3d& world) {
  const Vector3d local = pose.pad.inverse().apply(world);
  const Vector3d half(pad.extent_x / 2, pad.extent_y / 2, pad.thickness / 2);
  return sdf::rounded_box(local - Vector3d(0, 0, -pad.thickness / 2), half, 1.0);
}

bool clear_of_pad(const ScenePose& pose, const SceneSpecs& specs) {
  const auto& ns = specs.needle;
  for (int k = 0; k <= 64; ++k) {
    const double a = ns.arc_angle() * k / 64.0;
    const Vector3d p = pose.needle.apply(
        Vector3d(ns.circle_radius * std::cos(a), ns.circle_radius * std::sin(a), 0.0));
    if (pad_distance(pose, specs.pad, p) <= ns.wire_radius) return false;
  }
  const auto& is = specs.instrument;
  const double spread = is.jaw_length * std::tan(deg2rad(is.jaw_opening_angle / 2));
  for (int k = 0; k <= 64; ++k) {
    const double s = (is.jaw_length + is.shaft_length) * k / 64.0;
    const Vector3d p = pose.instrument.apply(Vector3d(s, 0, 0));
    const double clearance = s < is.jaw_length ? is.jaw_radius() + spread : is.shaft_radius;
    if (pad_distance(pose, specs.pad, p) <= clearance) return false;
  }
  return true;
}

bool needle_visible(const ScenePose& pose, const SceneSpecs& specs, const CameraModel& camera) {
  const RigidTransform world_to_cam = pose.camera.inverse();
  const Vector3d c = world_to_cam.apply(pose.needle.translation);
  if (c.z() < camera.near + specs.needle.circle_radius) return false;
  const Eigen::Vector2d px = camera.project(c);
  const double mx = 0.05 * camera.width;
  const double my = 0.05 * camera.height;
  return px.x() > mx && px.y() > my && px.x() < camera.width - mx && px.y() < camera.height - my;
}

}  // namespace

ScenePose build_scene(const SceneSpecs& specs, const CameraModel& camera,
                      const RandomizationConfig& rand, std::uint64_t seed) {
  specs.validate();
  camera.validate();
  rand.validate();
  Sampler sampler(seed);
  const ScenePose base = canonical_pose(specs, rand, true, rand.grasp_fraction.lo);
  for (int attempt = 0; attempt < rand.max_retries; ++attempt) {
    ScenePose pose;
    pose.seed = seed;
    {
      const Vector3d e = sampler.uniform3(rand.camera.euler_deg);
      const Vector3d t = sampler.uniform3(rand.camera.translation_mm);
      pose.camera = perturb(base.camera, e, t);
    }
    {
      const Vector3d e = sampler.uniform3(rand.pad.euler_deg);
      const Vector3d t = sampler.uniform3(rand.pad.translation_mm);
      pose.pad = perturb(RigidTransform{}, e, t);
    }
    {
      const Vector3d e = sampler.uniform3(rand.needle.euler_deg);
      const Vector3d t = sampler.uniform3(rand.needle.translation_mm);
      pose.needle = perturb(base.needle, e, t);
    }
    pose.grasped = sampler.bernoulli(rand.grasp_probability);
    const double f = sampler.uniform(rand.grasp_fraction);
    const double tilt = sampler.uniform(rand.grasp_tilt_deg);
    const Vector3d ie = sampler.uniform3(rand.instrument.euler_deg);
    const Vector3d it = sampler.uniform3(rand.instrument.translation_mm);
    if (pose.grasped) {
      pose.grasp_fraction = f;
      pose.instrument = grasping_instrument(pose.needle, specs.needle, specs.instrument, f, tilt);
    } else {
      RigidTransform free = grasping_instrument(pose.needle, specs.needle, specs.instrument,
                                                mid(rand.grasp_fraction), 0.0);
      free.translation += rand.free_offset_mm;
      pose.instrument = perturb(free, ie, it);
    }
    pose.light_dir = light_direction(sampler.uniform(rand.light_azimuth_deg),
                                     sampler.uniform(rand.light_elevation_deg));
    if (clear_of_pad(pose, specs) && needle_visible(pose, specs, camera)) return pose;
  }
  throw SceneError("build_scene: no arrangement clear of the pad interior with the needle in view "
                   "after " + std::to_string(rand.max_retries) + " attempts (seed " +
                   std::to_string(seed) + ")");
}

// ---------------------------------------------------------------------------
// Scene SDF

SceneSdf::SceneSdf(const ScenePose& poses, const SceneSpecs& specs) : specs_(specs) {
  const RigidTransform world_to_cam = poses.camera.inverse();
  const std::array<const RigidTransform*, 3> objects{&poses.pad, &poses.needle,
                                                     &poses.instrument};
  const auto& is = specs.instrument;
  const double spread = is.jaw_length * std::tan(deg2rad(is.jaw_opening_angle / 2));
  const std::array<Vector3d, 3> local_centers{
      Vector3d(0, 0, -specs.pad.thickness / 2), Vector3d::Zero(),
      Vector3d((is.jaw_length + is.shaft_length) / 2, 0, 0)};
  bound_radius_ = {
      Vector3d(specs.pad.extent_x / 2, specs.pad.extent_y / 2, specs.pad.thickness / 2).norm(),
      specs.needle.circle_radius + specs.needle.wire_radius,
      (is.jaw_length + is.shaft_length) / 2 +
          std::max(is.shaft_radius, spread + is.jaw_radius()) + is.jaw_radius()};
  for (int k = 0; k < 3; ++k) {
    const RigidTransform cam_from_local = world_to_cam * *objects[k];
    const RigidTransform local_from_cam = cam_from_local.inverse();
    rot_[k] = local_from_cam.rotation.toRotationMatrix();
    trans_[k] = local_from_cam.translation;
    bound_center_[k] = cam_from_local.apply(local_centers[k]);
  }
  present_ = {true, poses.needle_present, poses.instrument_present};
}

Vector3d SceneSdf::to_pad(const Vector3d& p_cam) const { return rot_[kPad] * p_cam + trans_[kPad]; }

double SceneSdf::distance(Object object, const Vector3d& p_cam) const {
  const Vector3d p = rot_[object] * p_cam + trans_[object];
  switch (object) {
    case kPad: {
      const auto& pad = specs_.pad;
      const Vector3d half(pad.extent_x / 2, pad.extent_y / 2, pad.thickness / 2);
      return sdf::rounded_box(p - Vector3d(0, 0, -pad.thickness / 2), half, 1.0);
    }
    case kNeedleObject: {
      const auto& n = specs_.needle;
      return sdf::torus_segment(p, n.circle_radius, n.wire_radius, n.arc_angle());
    }
    case kInstrumentObject: {
      const auto& is = specs_.instrument;
      const double spread = is.jaw_length * std::tan(deg2rad(is.jaw_opening_angle / 2));
      const Vector3d hinge(is.jaw_length, 0, 0);
      const double shaft = sdf::capped_cylinder(
          p, hinge, Vector3d(is.jaw_length + is.shaft_length, 0, 0), is.shaft_radius);
      const double upper = sdf::capsule(p, hinge, Vector3d(0, 0, spread), is.jaw_radius());
      const double lower = sdf::capsule(p, hinge, Vector3d(0, 0, -spread), is.jaw_radius());
      return std::min({shaft, upper, lower});
    }
  }
  return std::numeric_limits<double>::infinity();
}

SceneSdf::Nearest SceneSdf::nearest(const Vector3d& p_cam) const {
  Nearest best{std::numeric_limits<double>::infinity(), kPad};
  for (int k = 0; k < 3; ++k) {
    if (!present_[k]) continue;
    const double d = distance(static_cast<Object>(k), p_cam);
    if (d < best.distance) best = {d, static_cast<Object>(k)};
  }
  return best;
}

SceneSdf::Nearest SceneSdf::nearest_bounded(const Vector3d& p_cam) const {
  Nearest best{std::numeric_limits<double>::infinity(), kPad};
  for (int k = 0; k < 3; ++k) {
    if (!present_[k]) continue;
    // Distance to the bounding sphere never exceeds the true distance.
    const double bound = (p_cam - bound_center_[k]).norm() - bound_radius_[k];
    if (bound >= best.distance) continue;
    const double d = bound > 1.0 ? bound : distance(static_cast<Object>(k), p_cam);
    if (d < best.distance) best = {d, static_cast<Object>(k)};
  }
  return best;
}

Vector3d SceneSdf::normal(Object object, const Vector3d& p) const {
  constexpr double h = 1e-4;
  Vector3d g;
  for (int a = 0; a < 3; ++a) {
    Vector3d dp = Vector3d::Zero();
    dp[a] = h;
    g[a] = distance(object, p + dp) - distance(object, p - dp);
  }
  const double n = g.norm();
  return n > 0 ? Vector3d(g / n) : Vector3d(0, 0, -1);
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

struct Material {
  Vector3d albedo;
  double specular;
  double shininess;
};

const std::array<Material, 3> kMaterials{{
    {{0.86, 0.58, 0.52}, 0.05, 8.0},    // silicone pad
    {{0.78, 0.79, 0.84}, 0.60, 48.0},   // needle steel
    {{0.32, 0.33, 0.36}, 0.35, 24.0},   // holder
}};
const Vector3d kWoundColor(0.45, 0.12, 0.12);
const Vector3d kBackgroundColor(0.07, 0.05, 0.05);
constexpr double kAmbient = 0.25;

double segment_distance_2d(const Vector3d& p, const Vector3d& a, const Vector3d& b) {
  const Eigen::Vector2d pa = (p - a).head<2>();
  const Eigen::Vector2d ba = (b - a).head<2>();
  const double h = std::clamp(pa.dot(ba) / std::max(ba.squaredNorm(), 1e-12), 0.0, 1.0);
  return (pa - ba * h).norm();
}

}  // namespace

RenderSample render(const ScenePose& poses, const CameraModel& camera, const SceneSpecs& specs,
                    const RandomizationConfig& rand, const RenderOptions& options) {
  camera.validate();
  specs.validate();
  require(options.march_tolerance > 0 && options.max_steps > 0, "render: invalid march options");

  const SceneSdf scene(poses, specs);
  const Vector3d light_cam = poses.camera.rotation.conjugate() * poses.light_dir.normalized();

  RenderSample out;
  out.camera = camera;
  out.poses = poses;
  out.seed = poses.seed;
  out.depth = cv::Mat::zeros(camera.height, camera.width, CV_32F);
  out.seg = cv::Mat::zeros(camera.height, camera.width, CV_8U);
  cv::Mat shade(camera.height, camera.width, CV_64FC3);

  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const Vector3d dir = Vector3d((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0)
                               .normalized();
      double s = camera.near / dir.z();
      const double s_max = camera.far / dir.z();
      bool hit = false;
      SceneSdf::Object object = SceneSdf::kPad;
      for (int step = 0; step < options.max_steps && s < s_max; ++step) {
        const auto nearest = scene.nearest_bounded(s * dir);
        if (nearest.distance < options.march_tolerance) {
          hit = true;
          object = nearest.object;
          break;
        }
        s += nearest.distance;
      }
      Vector3d color = kBackgroundColor;
      if (hit && s < s_max) {
        const Vector3d p = s * dir;
        out.depth.at<float>(v, u) = static_cast<float>(p.z());
        out.seg.at<std::uint8_t>(v, u) = seg_class_of(object);
        const Material& m = kMaterials[object];
        Vector3d albedo = m.albedo;
        if (object == SceneSdf::kPad) {
          const Vector3d local = scene.to_pad(p);
          if (local.z() > -0.5 &&
              segment_distance_2d(local, specs.pad.wound_start, specs.pad.wound_end) < 0.8)
            albedo = kWoundColor;
        }
        const Vector3d n = scene.normal(object, p);
        const double diffuse = std::max(0.0, n.dot(light_cam));
        const Vector3d half = (light_cam - dir).normalized();
        const double spec = m.specular * std::pow(std::max(0.0, n.dot(half)), m.shininess);
        color = albedo * (kAmbient + (1.0 - kAmbient) * diffuse) + Vector3d::Constant(spec);
      }
      shade.at<cv::Vec3d>(v, u) = cv::Vec3d(color.x(), color.y(), color.z());
    }
  }

  std::mt19937_64 rng(derive_seed(poses.seed, std::string_view("sensor-noise")));
  std::normal_distribution<double> noise(0.0, 1.0);
  out.rgb.create(camera.height, camera.width, CV_8UC3);
  for (int v = 0; v < camera.height; ++v) {
    for (int u = 0; u < camera.width; ++u) {
      const cv::Vec3d c = shade.at<cv::Vec3d>(v, u);
      cv::Vec3b& px = out.rgb.at<cv::Vec3b>(v, u);
      for (int ch = 0; ch < 3; ++ch) {
        double value = c[ch];
        if (rand.noise_sigma > 0) value += rand.noise_sigma * noise(rng);
        px[ch] = static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset generation

void SceneGenConfig::validate() const {
  specs.validate();
  camera.validate();
  randomization.validate();
  require(test_fraction >= 0 && test_fraction <= 1, "scene: test_fraction must lie in [0, 1]");
}

namespace {

nlohmann::json transform_to_json(const RigidTransform& t) {
  const auto& q = t.rotation;
  return {{"q", {q.w(), q.x(), q.y(), q.z()}},
          {"t", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

RigidTransform transform_from_json(const nlohmann::json& j) {
  RigidTransform t;
  const auto& q = j.at("q");
  t.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                  q[3].get<double>());
  const auto& tr = j.at("t");
  t.translation = Vector3d(tr[0].get<double>(), tr[1].get<double>(), tr[2].get<double>());
  return t;
}

}  // namespace

void write_pose_json(const fs::path& path, const ScenePose& pose) {
  nlohmann::json j;
  j["camera"] = transform_to_json(pose.camera);
  j["pad"] = transform_to_json(pose.pad);
  j["needle"] = transform_to_json(pose.needle);
  j["instrument"] = transform_to_json(pose.instrument);
  j["light_dir"] = {pose.light_dir.x(), pose.light_dir.y(), pose.light_dir.z()};
  j["needle_present"] = pose.needle_present;
  j["instrument_present"] = pose.instrument_present;
  j["grasped"] = pose.grasped;
  j["grasp_fraction"] = pose.grasp_fraction;
  j["seed"] = pose.seed;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write pose file", path);
  out << j.dump(2) << '\n';
}

ScenePose read_pose_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file", path);
  const nlohmann::json j = nlohmann::json::parse(in);
  ScenePose pose;
  pose.camera = transform_from_json(j.at("camera"));
  pose.pad = transform_from_json(j.at("pad"));
  pose.needle = transform_from_json(j.at("needle"));
  pose.instrument = transform_from_json(j.at("instrument"));
  const auto& l = j.at("light_dir");
  pose.light_dir = Vector3d(l[0].get<double>(), l[1].get<double>(), l[2].get<double>());
  pose.needle_present = j.at("needle_present").get<bool>();
  pose.instrument_present = j.at("instrument_present").get<bool>();
  pose.grasped = j.at("grasped").get<bool>();
  pose.grasp_fraction = j.at("grasp_fraction").get<double>();
  pose.seed = j.at("seed").get<std::uint64_t>();
  return pose;
}

Manifest generate_dataset(int n, const SceneGenConfig& config, const fs::path& out_dir) {
  require(n > 0, "generate_dataset: n must be positive");
  config.validate();
  const fs::path frames = out_dir / "frames";
  std::error_code ec;
  fs::create_directories(frames, ec);
  if (ec) throw IoError("cannot create output directory (" + ec.message() + ")", frames);

  const std::uint64_t base_seed = config.randomization.seed;
  const int n_test = static_cast<int>(std::lround(n * config.test_fraction));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive_seed(base_seed, std::string_view("test-split")));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::vector<bool> is_test(n, false);
  for (int k = 0; k < n_test; ++k) is_test[order[k]] = true;

  Manifest manifest;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(i));
    const ScenePose pose = build_scene(config.specs, config.camera, config.randomization, seed);
    const RenderSample sample =
        render(pose, config.camera, config.specs, config.randomization, config.render);

    char stem[32];
    std::snprintf(stem, sizeof(stem), "%06d", i);
    SampleRecord r;
    r.id = std::string("syn_") + stem;
    r.rgb_path = fs::absolute(frames / (std::string(stem) + "_rgb.png")).lexically_normal();
    r.depth_path = fs::absolute(frames / (std::string(stem) + "_depth.png")).lexically_normal();
    r.seg_path = fs::absolute(frames / (std::string(stem) + "_seg.png")).lexically_normal();
    r.pose_path = fs::absolute(frames / (std::string(stem) + "_pose.json")).lexically_normal();
    r.split = is_test[i] ? Split::Test : Split::Train;
    r.provenance = Provenance::Synthetic;
    r.camera = config.camera;
    r.seed = seed;
    write_rgb_png(r.rgb_path, sample.rgb);
    write_depth_png(*r.depth_path, sample.depth);
    write_seg_png(r.seg_path, sample.seg);
    write_pose_json(*r.pose_path, pose);
    manifest.records.push_back(std::move(r));
  }
  write_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

}  // namespace suture
