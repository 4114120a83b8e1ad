#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "suture/error.hpp"
#include "suture/geometry.hpp"
#include "suture/image_io.hpp"
#include "suture/scenegen.hpp"
#include "suture/seed.hpp"
#include "test_support.hpp"

using namespace suture;
using Eigen::Vector3d;

namespace {

struct Circle {
  Vector3d center, u, v;
  double radius;
  Vector3d normal() const { return u.cross(v); }
  Vector3d at(double a) const { return center + radius * (std::cos(a) * u + std::sin(a) * v); }
};

Circle tilted_circle() {
  const Eigen::Matrix3d r =
      Eigen::AngleAxisd(0.4, Vector3d(1, 2, 0.5).normalized()).toRotationMatrix();
  return {Vector3d(5, -3, 110), r.col(0), r.col(1), 8.0};
}

std::vector<Vector3d> arc_points(const Circle& c, int n, double a0, double a1) {
  std::vector<Vector3d> pts;
  for (int i = 0; i < n; ++i) pts.push_back(c.at(a0 + (a1 - a0) * i / (n - 1)));
  return pts;
}

double angle_deg(const Vector3d& a, const Vector3d& b) {
  return rad2deg(std::acos(std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0)));
}

}  // namespace

// ---------------------------------------------------------------------------
// Circle

TEST(CircleFit, ExactPointsRecoveredToMachinePrecision) {
  const Circle c = tilted_circle();
  const CircleFit3D fit = fit_circle_3d(arc_points(c, 50, 0.0, kPi));
  EXPECT_LT((fit.center - c.center).norm(), 1e-6);
  EXPECT_NEAR(fit.radius, c.radius, 1e-6);
  EXPECT_LT(angle_deg(fit.normal, c.normal()), 1e-5);
  EXPECT_NEAR(fit.arc_span, kPi, 1e-6);
  EXPECT_DOUBLE_EQ(fit.inlier_fraction, 1.0);
  EXPECT_FALSE(fit.low_confidence);
  // Normal faces the camera at the origin.
  EXPECT_GT(fit.normal.dot(-fit.center), 0.0);
}

TEST(CircleFit, EquilateralTriangleCircumradius) {
  const double s = 6.0;
  const std::vector<Vector3d> pts = {{0, 0, 50}, {s, 0, 50}, {s / 2, s * std::sqrt(3.0) / 2, 50}};
  const CircleFit3D fit = fit_circle_3d(pts);
  EXPECT_NEAR(fit.radius, s / std::sqrt(3.0), 1e-9);
}

TEST(CircleFit, RigidMotionMovesTheCenterAlong) {
  const Circle c = tilted_circle();
  const std::vector<Vector3d> pts = arc_points(c, 40, 0.3, 2.9);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Vector3d(0.2, -1, 0.3).normalized()).toRotationMatrix();
  const Vector3d t(-12, 4, 30);
  std::vector<Vector3d> moved;
  for (const Vector3d& p : pts) moved.push_back(r * p + t);
  const CircleFit3D a = fit_circle_3d(pts), b = fit_circle_3d(moved);
  EXPECT_LT((r * a.center + t - b.center).norm(), 1e-6);
  EXPECT_NEAR(a.radius, b.radius, 1e-6);
}

TEST(CircleFit, NoiseMedianCenterErrorSmall) {
  // Gaussian noise of 0.3 mm per coordinate on 120 half-arc points, 100 trials.
  const Circle c = tilted_circle();
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<double> errors;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vector3d> pts = arc_points(c, 120, 0.0, kPi);
    for (Vector3d& p : pts) p += Vector3d(noise(rng), noise(rng), noise(rng));
    GeometryConfig cfg;
    cfg.seed = trial;
    errors.push_back((fit_circle_3d(pts, cfg).center - c.center).norm());
  }
  std::nth_element(errors.begin(), errors.begin() + 50, errors.end());
  EXPECT_LT(errors[50], 0.5);
}

TEST(CircleFit, TubeSurfacePointsGiveTheCenterline) {
  // Samples on the camera-facing half of a 0.4 mm wire bent along the circle.
  const Circle c = tilted_circle();
  const double wire = 0.4;
  std::vector<Vector3d> pts;
  for (int i = 0; i < 90; ++i) {
    const double a = kPi * i / 89;
    const Vector3d centre = c.at(a);
    const Vector3d radial = (centre - c.center).normalized();
    for (int k = 0; k < 12; ++k) {
      const double t = 2 * kPi * k / 12;
      const Vector3d offset = wire * (std::cos(t) * radial + std::sin(t) * c.normal());
      if (offset.dot(-centre) > 0.0) pts.push_back(centre + offset);
    }
  }
  const CircleFit3D plain = fit_circle_3d(pts);
  const CircleFit3D tube = fit_circle_3d(pts, {}, wire);
  EXPECT_LT((tube.center - c.center).norm(), 1e-3);
  EXPECT_NEAR(tube.radius, c.radius, 1e-3);
  EXPECT_LT(angle_deg(tube.normal, c.normal()), 0.01);
  EXPECT_GT((plain.center - c.center).norm(), (tube.center - c.center).norm());
}

TEST(CircleFit, DegenerateInputRejected) {
  EXPECT_THROW(fit_circle_3d({{0, 0, 1}, {1, 0, 1}}), ValidationError);
  std::vector<Vector3d> line;
  for (int i = 0; i < 10; ++i) line.push_back({double(i), 2.0 * i, 50.0});
  EXPECT_THROW(fit_circle_3d(line), ValidationError);
}

TEST(CircleFit, MostlyOutliersFlaggedLowConfidence) {
  const Circle c = tilted_circle();
  std::vector<Vector3d> pts = arc_points(c, 30, 0.0, kPi);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> box(-30, 30);
  for (int i = 0; i < 70; ++i) pts.push_back(c.center + Vector3d(box(rng), box(rng), box(rng)));
  GeometryConfig cfg;
  cfg.min_inlier_fraction = 0.5;
  const CircleFit3D fit = fit_circle_3d(pts, cfg);
  EXPECT_TRUE(fit.low_confidence);
  EXPECT_LT((fit.center - c.center).norm(), 0.05);  // RANSAC still finds the arc
}

// ---------------------------------------------------------------------------
// Axis and plane

TEST(AxisFit, PointsOnALine) {
  const Vector3d dir = Vector3d(1, 2, -0.5).normalized();
  std::vector<Vector3d> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(Vector3d(3, 1, 80) + i * 0.7 * dir);
  const AxisFit fit = fit_axis(pts, Vector3d(3, 1, 80) + 100 * dir);
  EXPECT_GT(fit.direction.dot(dir), 1 - 1e-12);
  EXPECT_LT((fit.tip - pts.back()).norm(), 1e-9);
  const AxisFit back = fit_axis(pts, Vector3d(3, 1, 80) - 100 * dir);
  EXPECT_LT(back.direction.dot(dir), -1 + 1e-12);
  EXPECT_LT((back.tip - pts.front()).norm(), 1e-9);
}

TEST(AxisFit, CylinderSurfaceWithinOneDegree) {
  const Vector3d dir = Vector3d(0.3, -1, 0.2).normalized();
  const Vector3d a = dir.unitOrthogonal(), b = dir.cross(a);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> along(0, 60), around(0, 2 * kPi);
  std::vector<Vector3d> pts;
  for (int i = 0; i < 2000; ++i) {
    const double t = around(rng);
    pts.push_back(Vector3d(0, 0, 120) + along(rng) * dir + 2.5 * (std::cos(t) * a + std::sin(t) * b));
  }
  const AxisFit fit = fit_axis(pts);
  EXPECT_LT(angle_deg(fit.direction, dir), 1.0);
  EXPECT_FALSE(fit.low_confidence);
}

TEST(AxisFit, TwoPointsAndErrors) {
  const AxisFit fit = fit_axis({{0, 0, 10}, {0, 0, 20}}, Vector3d(0, 0, 30));
  EXPECT_GT(fit.direction.z(), 1 - 1e-12);
  EXPECT_NEAR(fit.tip.z(), 20.0, 1e-9);
  EXPECT_THROW(fit_axis({{0, 0, 10}}), ValidationError);
  EXPECT_THROW(fit_axis({{0, 0, 10}, {0, 0, 10}}), ValidationError);
}

TEST(PlaneFit, HorizontalPlane) {
  std::vector<Vector3d> pts;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) pts.push_back({i * 2.0 - 20, j * 2.0 - 20, 100.0});
  const Plane p = fit_pad_plane(pts);
  EXPECT_LT(angle_deg(p.normal, Vector3d::UnitZ()), 1e-6);
  EXPECT_GT(p.normal.z(), 0.0);
  EXPECT_NEAR(p.offset, 100.0, 1e-9);
  EXPECT_DOUBLE_EQ(p.inlier_fraction, 1.0);
}

TEST(PlaneFit, TwentyPercentOutliers) {
  const Vector3d n = Vector3d(0.2, -0.5, 1).normalized();
  const Vector3d a = n.unitOrthogonal(), b = n.cross(a);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> in(-40, 40), off(5, 40);
  std::normal_distribution<double> jitter(0, 0.1);
  std::vector<Vector3d> pts;
  for (int i = 0; i < 800; ++i) pts.push_back(150 * n + in(rng) * a + in(rng) * b + jitter(rng) * n);
  for (int i = 0; i < 200; ++i) pts.push_back(150 * n + in(rng) * a + in(rng) * b - off(rng) * n);
  const Plane p = fit_pad_plane(pts);
  EXPECT_LT(angle_deg(p.normal, n), 0.5);
  EXPECT_NEAR(p.inlier_fraction, 0.8, 0.01);
  std::vector<Vector3d> line;
  for (int i = 0; i < 10; ++i) line.push_back({double(i), 0, 100});
  EXPECT_THROW(fit_pad_plane(line), ValidationError);
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

/// Half circle in the x-z plane, running from (0, 0, 92) up to (0, 0, 108); the upper
/// end is nearer the pad plane z = 115, so it is the tip.
CircleFit3D vertical_half_circle() {
  CircleFit3D c;
  c.center = {0, 0, 100};
  c.u = {1, 0, 0};
  c.v = {0, 0, 1};
  c.normal = c.u.cross(c.v);
  c.radius = 8.0;
  c.arc_start = -kPi / 2;
  c.arc_span = kPi;
  return c;
}

Plane pad_z(double z) {
  Plane p;
  p.normal = {0, 0, 1};
  p.offset = z;
  return p;
}

}  // namespace

TEST(SutureMetrics, TwoThirdsFromTheTip) {
  const CircleFit3D c = vertical_half_circle();
  AxisFit axis;
  axis.direction = c.normal;
  // Holder tip 120 degrees from the tip end, slightly off the needle plane.
  axis.tip = c.point_at(kPi / 2 - 2 * kPi / 3) + 1.0 * c.normal;
  const SutureMetrics m = compute_suture_metrics(c, axis, pad_z(115));
  EXPECT_NEAR(m.grasp_fraction, 2.0 / 3.0, 1e-9);
  EXPECT_TRUE(m.grasp_fraction_ok);
  EXPECT_FALSE(m.tip_ambiguous);
  EXPECT_LT((m.tip - Vector3d(0, 0, 108)).norm(), 1e-9);
  EXPECT_NEAR(m.grasp_angle_deg, 90.0, 1e-9);  // holder perpendicular to the chord
  EXPECT_NEAR(m.plane_instrument_angle_deg, 90.0, 1e-9);
}

TEST(SutureMetrics, HolderInThePlaneAlongTheChord) {
  const CircleFit3D c = vertical_half_circle();
  AxisFit axis;
  axis.direction = {0, 0, 1};
  axis.tip = c.point_at(0.0);
  const SutureMetrics m = compute_suture_metrics(c, axis, pad_z(115));
  EXPECT_NEAR(m.grasp_angle_deg, 0.0, 1e-9);
  EXPECT_NEAR(m.plane_instrument_angle_deg, 0.0, 1e-9);
  EXPECT_NEAR(m.grasp_fraction, 0.5, 1e-9);
  EXPECT_FALSE(m.grasp_angle_ok);
}

TEST(SutureMetrics, AnglesIgnoreAxisSign) {
  const CircleFit3D c = vertical_half_circle();
  AxisFit a;
  a.direction = Vector3d(0.3, -0.8, 0.5).normalized();
  a.tip = c.point_at(0.4);
  AxisFit b = a;
  b.direction = -a.direction;
  const SutureMetrics ma = compute_suture_metrics(c, a, pad_z(115));
  const SutureMetrics mb = compute_suture_metrics(c, b, pad_z(115));
  EXPECT_NEAR(ma.grasp_angle_deg, mb.grasp_angle_deg, 1e-12);
  EXPECT_NEAR(ma.plane_instrument_angle_deg, mb.plane_instrument_angle_deg, 1e-12);
  EXPECT_GE(ma.grasp_angle_deg, 0.0);
  EXPECT_LE(ma.grasp_angle_deg, 90.0);
}

TEST(SutureMetrics, EntryAngleAndMissingPlane) {
  CircleFit3D c = vertical_half_circle();
  c.arc_start = 0.0;  // (8, 0, 100) -> (-8, 0, 100) through (0, 0, 108)
  Plane pad;
  pad.normal = {1, 0, 0};
  pad.offset = 9.0;  // x = 9, beside the start point
  AxisFit axis;
  axis.direction = c.normal;
  axis.tip = c.point_at(kPi / 3);
  const SutureMetrics m = compute_suture_metrics(c, axis, pad);
  ASSERT_TRUE(m.entry_angle_deg);
  EXPECT_NEAR(*m.entry_angle_deg, 0.0, 1e-9);  // tangent at the start is parallel to the pad
  c.arc_start = -kPi / 2;  // (0, 0, 92) -> (0, 0, 108), forward tangent at the tip is -x
  const SutureMetrics m2 = compute_suture_metrics(c, axis, pad_z(115));
  ASSERT_TRUE(m2.entry_angle_deg);
  EXPECT_NEAR(*m2.entry_angle_deg, 0.0, 1e-9);
  // Against the x = 9 pad the same tangent is along the pad normal.
  const SutureMetrics m3 = compute_suture_metrics(c, axis, pad);
  ASSERT_TRUE(m3.entry_angle_deg);
  EXPECT_NEAR(*m3.entry_angle_deg, 90.0, 1e-9);
  EXPECT_EQ(*m3.entry_angle_ok, true);

  const SutureMetrics none = compute_suture_metrics(c, axis, std::nullopt);
  EXPECT_TRUE(none.tip_ambiguous);
  EXPECT_FALSE(none.entry_angle_deg);
}

// ---------------------------------------------------------------------------
// Frames

TEST(ArcExtension, HiddenEndExtendedToNominalSpan) {
  const CameraModel cam = suture::testing::small_camera(200, 200, 200.0);
  CircleFit3D c;
  c.center = {0, 0, 100};
  c.u = {1, 0, 0};
  c.v = {0, 1, 0};
  c.normal = {0, 0, 1};
  c.radius = 20.0;
  c.arc_start = 0.0;
  c.arc_span = deg2rad(150.0);
  cv::Mat depth(200, 200, CV_32F, cv::Scalar(120.0f)), seg(200, 200, CV_8U, cv::Scalar(0));
  // Holder in front of the circle past the 150 degree end.
  for (double a = 151.0; a <= 178.0; a += 1.0) {
    const Eigen::Vector2d px = cam.project(c.point_at(deg2rad(a)));
    const cv::Rect r(int(px.x()) - 3, int(px.y()) - 3, 7, 7);
    depth(r).setTo(90.0f);
    seg(r).setTo(2);
  }
  GeometryConfig cfg;
  CircleFit3D end_hidden = c;
  ASSERT_TRUE(extend_occluded_arc(end_hidden, depth, seg, cam, cfg));
  EXPECT_NEAR(end_hidden.arc_start, 0.0, 1e-12);
  EXPECT_NEAR(end_hidden.arc_span, kPi, 1e-12);
  EXPECT_TRUE(end_hidden.arc_extended);

  // Mirrored image: the hidden stretch now lies at 182..209 degrees, just before an arc
  // that starts at 210 degrees.
  CircleFit3D start_hidden = c;
  start_hidden.arc_start = deg2rad(210.0);
  start_hidden.arc_span = deg2rad(150.0);
  cv::Mat seg_flip, depth_flip;
  cv::flip(seg, seg_flip, 0);
  cv::flip(depth, depth_flip, 0);
  ASSERT_TRUE(extend_occluded_arc(start_hidden, depth_flip, seg_flip, cam, cfg));
  EXPECT_NEAR(start_hidden.arc_start, deg2rad(180.0), 1e-9);
  EXPECT_NEAR(start_hidden.arc_span, kPi, 1e-12);

  // Holder behind the needle does not hide it.
  CircleFit3D behind = c;
  cv::Mat far = depth.clone();
  far.setTo(130.0f, seg == 2);
  EXPECT_FALSE(extend_occluded_arc(behind, far, seg, cam, cfg));
  cfg.needle_arc_deg = 0.0;
  EXPECT_FALSE(extend_occluded_arc(behind, depth, seg, cam, cfg));
}

TEST(AnalyzeFrame, RecoversRenderedNeedle) {
  SceneGenConfig sg;
  sg.randomization.noise_sigma = 0.0;
  for (std::uint64_t i = 0; i < 3; ++i) {
    const ScenePose pose = build_scene(sg.specs, sg.camera, sg.randomization,
                                       derive_seed(std::uint64_t{99}, i));
    const RenderSample rs = render(pose, sg.camera, sg.specs, sg.randomization, sg.render);
    const FrameGeometry g = analyze_frame(quantize_depth(rs.depth), rs.seg, sg.camera);
    ASSERT_TRUE(g.circle);
    const RigidTransform needle = pose.camera.inverse() * pose.needle;
    EXPECT_LT((g.circle->center - needle.translation).norm(), 0.5);
    EXPECT_NEAR(g.circle->radius, sg.specs.needle.circle_radius, 0.2);
    EXPECT_LT(angle_deg(g.circle->normal, needle.rotate(Vector3d::UnitZ())), 1.0);
    ASSERT_TRUE(g.pad_plane);
    const RigidTransform pad = pose.camera.inverse() * pose.pad;
    EXPECT_LT(angle_deg(g.pad_plane->normal, pad.rotate(Vector3d::UnitZ())), 1.0);
    if (pose.grasped) {
      ASSERT_TRUE(g.metrics);
      EXPECT_NEAR(g.metrics->grasp_fraction, pose.grasp_fraction, 0.05);
    }
    const nlohmann::json j = geometry_to_json(g);
    EXPECT_TRUE(j["circle"].contains("center_mm"));
    EXPECT_EQ(j["needle_points"], g.needle_points);
  }
}

TEST(AnalyzeFrame, EmptyFrameHasNoFits) {
  const CameraModel cam = suture::testing::small_camera(40, 30, 50.0);
  const FrameGeometry g = analyze_frame(cv::Mat(30, 40, CV_32F, cv::Scalar(0.0f)),
                                        cv::Mat(30, 40, CV_8U, cv::Scalar(0)), cam);
  EXPECT_FALSE(g.circle);
  EXPECT_FALSE(g.axis);
  EXPECT_FALSE(g.metrics);
  EXPECT_THROW(analyze_frame(cv::Mat(10, 10, CV_32F), cv::Mat(10, 10, CV_8U), cam),
               ValidationError);
}
