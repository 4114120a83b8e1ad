#pragma once

// Lifts predicted segmentation + depth into 3D and fits the quantities shown in
// the overlay: needle circle (rotation center, plane), holder axis, pad plane and
// the grasp / entry metrics derived from them.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "suture/camera.hpp"

namespace suture {

using Eigen::Vector3d;

struct LabeledPointCloud {
  std::vector<Vector3d> needle;
  std::vector<Vector3d> instrument;
  std::vector<Vector3d> background;
};

/// Pixels with depth > 0 become X = (u - cx) z / fx, Y = (v - cy) z / fy, Z = z,
/// sorted into the cloud of their class.
LabeledPointCloud backproject(const cv::Mat& depth_mm, const cv::Mat& seg,
                              const CameraModel& camera);

struct GeometryConfig {
  int ransac_iterations = 500;
  double circle_tolerance_mm = 1.0;
  double plane_tolerance_mm = 2.0;
  double min_inlier_fraction = 0.3;
  /// Visible needle points lie on the wire surface, one wire radius from the circle;
  /// analyze_frame fits the circle with this tube radius.
  double wire_radius_mm = 0.4;
  /// Holder points sit on the camera-facing side of the shaft and jaws; they are pushed
  /// this far along their viewing rays before the axis fit.
  double instrument_surface_offset_mm = 1.5;
  /// Nominal needle arc. When the visible arc is shorter and exactly one end is hidden
  /// behind the holder, that end is extended to this span. 0 disables the extension.
  double needle_arc_deg = 180.0;
  double tip_ambiguity_mm = 2.0;
  int min_points = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CircleFit3D {
  Vector3d center = Vector3d::Zero();
  Vector3d normal = Vector3d::UnitZ();
  Vector3d u = Vector3d::UnitX();  // in-plane basis, normal = u x v
  Vector3d v = Vector3d::UnitY();
  double radius = 0.0;
  double inlier_fraction = 0.0;
  double arc_start = 0.0;  // radians in the (u, v) frame
  double arc_span = 0.0;   // radians, arc runs counter-clockwise from arc_start
  bool low_confidence = false;
  bool arc_extended = false;  // one end was occluded and extended to the nominal arc

  Vector3d point_at(double angle) const;
  /// Unit tangent in the direction of increasing angle.
  Vector3d tangent_at(double angle) const;
  double angle_of(const Vector3d& p) const;
  Vector3d arc_begin() const { return point_at(arc_start); }
  Vector3d arc_end() const { return point_at(arc_start + arc_span); }
  /// Distance from p to the full circle curve.
  double distance(const Vector3d& p) const;
};

/// RANSAC over 3-point circumcircles, least-squares refinement on the inliers (plane from
/// the smallest principal component, algebraic circle fit in-plane), then a geometric
/// Gauss-Newton fit of |dist(p, circle) - tube_radius_mm|. A positive tube radius models
/// points sampled on the surface of a wire bent along the circle.
/// Throws ValidationError for fewer than 3 points or a collinear set.
CircleFit3D fit_circle_3d(const std::vector<Vector3d>& points, const GeometryConfig& cfg = {},
                          double tube_radius_mm = 0.0);

struct AxisFit {
  Vector3d point = Vector3d::Zero();
  Vector3d direction = Vector3d::UnitX();  // oriented toward the tip
  Vector3d tip = Vector3d::Zero();
  double singular_ratio = 0.0;  // largest / second singular value
  bool low_confidence = false;
};

/// Principal axis through the centroid. When `toward` is given the direction is oriented
/// toward it; the tip is the axis point at the extreme projection of the inliers.
AxisFit fit_axis(const std::vector<Vector3d>& points,
                 const std::optional<Vector3d>& toward = std::nullopt);

/// n . x = offset with |n| = 1 and offset >= 0.
struct Plane {
  Vector3d normal = Vector3d::UnitZ();
  double offset = 0.0;
  double inlier_fraction = 0.0;

  double signed_distance(const Vector3d& p) const { return normal.dot(p) - offset; }
};

Plane fit_pad_plane(const std::vector<Vector3d>& points, const GeometryConfig& cfg = {});

inline constexpr double kGraspFractionLow = 0.6;
inline constexpr double kGraspFractionHigh = 0.73;
inline constexpr double kGraspAngleFoldedLow = 60.0;  // 90..120 deg folded into [0, 90]
inline constexpr double kEntryAngleLow = 80.0;

struct SutureMetrics {
  double grasp_fraction = 0.0;
  double grasp_angle_deg = 0.0;
  double plane_instrument_angle_deg = 0.0;
  std::optional<double> entry_angle_deg;
  Vector3d tip = Vector3d::Zero();
  Vector3d grasp_point = Vector3d::Zero();
  double tip_angle = 0.0;    // circle angle of the tip endpoint
  double grasp_angle_on_circle = 0.0;
  bool tip_ambiguous = false;
  bool low_confidence = false;
  bool grasp_fraction_ok = false;
  bool grasp_angle_ok = false;
  std::optional<bool> entry_angle_ok;
};

/// The tip is the arc endpoint nearer the pad plane (arc start when there is no plane,
/// flagged ambiguous); the grasp point is the arc point nearest the holder tip.
SutureMetrics compute_suture_metrics(const CircleFit3D& circle, const AxisFit& axis,
                                     const std::optional<Plane>& pad_plane,
                                     const GeometryConfig& cfg = {});

struct FrameGeometry {
  std::size_t needle_points = 0;
  std::size_t instrument_points = 0;
  std::optional<CircleFit3D> circle;
  std::optional<AxisFit> axis;
  std::optional<Plane> pad_plane;
  std::optional<SutureMetrics> metrics;
};

/// Extends an arc end hidden behind the holder so the span matches cfg.needle_arc_deg.
/// An end is hidden when the circle continued past it lands on holder pixels nearer to
/// the camera than the circle itself. Returns true when the arc was changed.
bool extend_occluded_arc(CircleFit3D& circle, const cv::Mat& depth_mm, const cv::Mat& seg,
                         const CameraModel& camera, const GeometryConfig& cfg);

/// Full per-frame chain; fits are skipped when a class has fewer than cfg.min_points.
FrameGeometry analyze_frame(const cv::Mat& depth_mm, const cv::Mat& seg, const CameraModel& camera,
                            const GeometryConfig& cfg = {});

nlohmann::json geometry_to_json(const FrameGeometry& g);

}  // namespace suture
