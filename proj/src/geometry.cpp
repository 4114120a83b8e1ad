#include "suture/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/QR>

#include "suture/error.hpp"
#include "suture/rigid.hpp"
#include "suture/seed.hpp"

namespace suture {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

double wrap_positive(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

struct Pca {
  Vector3d centroid;
  Eigen::Matrix3d axes;     // columns sorted by decreasing variance
  Eigen::Vector3d sigma;    // singular values (sqrt of summed squared deviations)
};

template <typename Index>
Pca pca(const std::vector<Vector3d>& points, const Index& idx) {
  Pca out;
  out.centroid.setZero();
  for (std::size_t i : idx) out.centroid += points[i];
  out.centroid /= static_cast<double>(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i : idx) {
    const Vector3d d = points[i] - out.centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // Eigen sorts ascending.
  for (int k = 0; k < 3; ++k) {
    out.axes.col(k) = eig.eigenvectors().col(2 - k);
    out.sigma(k) = std::sqrt(std::max(0.0, eig.eigenvalues()(2 - k)));
  }
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

/// Deterministic subset used to score RANSAC hypotheses on large clouds.
std::vector<std::size_t> scoring_subset(std::size_t n, std::size_t cap) {
  if (n <= cap) return all_indices(n);
  std::vector<std::size_t> idx;
  idx.reserve(cap);
  for (std::size_t k = 0; k < cap; ++k) idx.push_back(k * n / cap);
  return idx;
}

void require_not_collinear(const std::vector<Vector3d>& points, const char* what) {
  const Pca p = pca(points, all_indices(points.size()));
  require(p.sigma(0) > 0.0, std::string(what) + ": all points coincide");
  require(p.sigma(1) > 1e-9 * p.sigma(0), std::string(what) + ": points are collinear");
}

std::array<std::size_t, 3> pick3(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t a = pick(rng), b, c;
  do b = pick(rng); while (b == a);
  do c = pick(rng); while (c == a || c == b);
  return {a, b, c};
}

std::optional<CircleFit3D> circumcircle(const Vector3d& a, const Vector3d& b, const Vector3d& c) {
  const Vector3d ab = b - a;
  const Vector3d ac = c - a;
  const Vector3d n = ab.cross(ac);
  const double n2 = n.squaredNorm();
  if (n2 < 1e-12 * ab.squaredNorm() * ac.squaredNorm() || n2 == 0.0) return std::nullopt;
  const Vector3d offset =
      (ac.squaredNorm() * n.cross(ab) + ab.squaredNorm() * ac.cross(n)) / (2.0 * n2);
  CircleFit3D fit;
  fit.center = a + offset;
  fit.radius = offset.norm();
  fit.normal = n.normalized();
  return fit;
}

void set_basis(CircleFit3D& fit) {
  // Normal faces the camera at the origin, giving a deterministic orientation.
  if (fit.normal.dot(-fit.center) < 0.0) fit.normal = -fit.normal;
  const Vector3d helper =
      std::abs(fit.normal.x()) < 0.9 ? Vector3d::UnitX() : Vector3d::UnitY();
  fit.u = (helper - helper.dot(fit.normal) * fit.normal).normalized();
  fit.v = fit.normal.cross(fit.u);
}

/// Plane from the smallest principal component, then the algebraic (Kasa) circle fit
/// x^2 + y^2 + D x + E y + F = 0 in that plane.
std::optional<CircleFit3D> refine_circle(const std::vector<Vector3d>& points,
                                         const std::vector<std::size_t>& idx) {
  if (idx.size() < 3) return std::nullopt;
  const Pca p = pca(points, idx);
  if (p.sigma(1) <= 1e-9 * p.sigma(0)) return std::nullopt;
  CircleFit3D fit;
  fit.normal = p.axes.col(2).normalized();
  fit.center = p.centroid;
  set_basis(fit);
  Eigen::MatrixXd A(idx.size(), 3);
  Eigen::VectorXd rhs(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Vector3d w = points[idx[k]] - p.centroid;
    const double x = w.dot(fit.u);
    const double y = w.dot(fit.v);
    A(k, 0) = x;
    A(k, 1) = y;
    A(k, 2) = 1.0;
    rhs(k) = -(x * x + y * y);
  }
  const Eigen::Vector3d sol = A.colPivHouseholderQr().solve(rhs);
  const double cx = -sol(0) / 2.0;
  const double cy = -sol(1) / 2.0;
  const double r2 = cx * cx + cy * cy - sol(2);
  if (!(r2 > 0.0)) return std::nullopt;
  fit.center = p.centroid + cx * fit.u + cy * fit.v;
  fit.radius = std::sqrt(r2);
  set_basis(fit);
  return fit;
}

template <typename Model>
std::vector<std::size_t> inliers_of(const std::vector<Vector3d>& points, const Model& distance,
                                    double tol) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (distance(points[i]) <= tol) idx.push_back(i);
  return idx;
}

/// Levenberg-Marquardt on r_i = dist(p_i, circle) - tube over the center, a tilt of the
/// normal and the radius; the Jacobian is taken by central differences.
void geometric_refine(const std::vector<Vector3d>& points, const std::vector<std::size_t>& idx,
                      CircleFit3D& fit, double tube) {
  if (idx.size() < 6) return;
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  const auto moved = [&](const Vec6& x) {
    CircleFit3D c = fit;
    c.center = fit.center + x(0) * fit.u + x(1) * fit.v + x(2) * fit.normal;
    c.normal = (fit.normal + x(3) * fit.u + x(4) * fit.v).normalized();
    c.radius = fit.radius + x(5);
    return c;
  };
  const auto residuals = [&](const Vec6& x, Eigen::VectorXd& r) {
    const CircleFit3D c = moved(x);
    r.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) r(k) = c.distance(points[idx[k]]) - tube;
  };
  Eigen::VectorXd r0, rp, rm;
  Eigen::MatrixXd J(static_cast<Eigen::Index>(idx.size()), 6);
  double lambda = 1e-3;
  for (int it = 0; it < 30; ++it) {
    residuals(Vec6::Zero(), r0);
    const double cost = r0.squaredNorm();
    const double h = 1e-6 * std::max(1.0, fit.radius);
    for (int j = 0; j < 6; ++j) {
      Vec6 e = Vec6::Zero();
      e(j) = j == 3 || j == 4 ? 1e-7 : h;
      residuals(e, rp);
      residuals(-e, rm);
      J.col(j) = (rp - rm) / (2.0 * e(j));
    }
    const Eigen::Matrix<double, 6, 6> JtJ = J.transpose() * J;
    const Vec6 g = J.transpose() * r0;
    bool improved = false;
    while (lambda < 1e10) {
      Eigen::Matrix<double, 6, 6> A = JtJ;
      A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-12);
      const Vec6 step = A.ldlt().solve(-g);
      residuals(step, rp);
      if (rp.squaredNorm() < cost) {
        fit = moved(step);
        set_basis(fit);
        lambda = std::max(lambda / 10.0, 1e-9);
        improved = cost - rp.squaredNorm() > 1e-14 * cost;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
}

void set_arc(CircleFit3D& fit, const std::vector<Vector3d>& points,
             const std::vector<std::size_t>& idx) {
  std::vector<double> angles;
  angles.reserve(idx.size());
  for (std::size_t i : idx) angles.push_back(wrap_positive(fit.angle_of(points[i])));
  std::sort(angles.begin(), angles.end());
  if (angles.empty()) return;
  double best_gap = angles.front() + kTwoPi - angles.back();
  double start = angles.front();
  for (std::size_t k = 1; k < angles.size(); ++k) {
    const double gap = angles[k] - angles[k - 1];
    if (gap > best_gap) {
      best_gap = gap;
      start = angles[k];
    }
  }
  fit.arc_start = start;
  fit.arc_span = kTwoPi - best_gap;
}

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

}  // namespace

void GeometryConfig::validate() const {
  require(ransac_iterations >= 1, "geometry: ransac_iterations must be >= 1");
  require(circle_tolerance_mm > 0.0 && plane_tolerance_mm > 0.0,
          "geometry: RANSAC tolerances must be > 0");
  require(min_inlier_fraction >= 0.0 && min_inlier_fraction <= 1.0,
          "geometry: min_inlier_fraction must lie in [0, 1]");
  require(wire_radius_mm >= 0.0, "geometry: wire_radius_mm must be >= 0");
  require(instrument_surface_offset_mm >= 0.0,
          "geometry: instrument_surface_offset_mm must be >= 0");
  require(needle_arc_deg >= 0.0 && needle_arc_deg <= 360.0,
          "geometry: needle_arc_deg must lie in [0, 360]");
  require(tip_ambiguity_mm >= 0.0, "geometry: tip_ambiguity_mm must be >= 0");
  require(min_points >= 3, "geometry: min_points must be >= 3");
}

LabeledPointCloud backproject(const cv::Mat& depth_mm, const cv::Mat& seg,
                              const CameraModel& camera) {
  require(depth_mm.type() == CV_32F && seg.type() == CV_8U,
          "backproject: expected CV_32F depth and CV_8U segmentation");
  require(depth_mm.size() == seg.size(), "backproject: depth and segmentation sizes differ");
  require(depth_mm.cols == camera.width && depth_mm.rows == camera.height,
          "backproject: image size does not match the camera");
  LabeledPointCloud cloud;
  for (int v = 0; v < depth_mm.rows; ++v) {
    const float* d = depth_mm.ptr<float>(v);
    const auto* s = seg.ptr<std::uint8_t>(v);
    for (int u = 0; u < depth_mm.cols; ++u) {
      if (!(d[u] > 0.0f)) continue;
      const Vector3d p = camera.backproject(u, v, d[u]);
      switch (s[u]) {
        case 0:
          cloud.background.push_back(p);
          break;
        case 1:
          cloud.needle.push_back(p);
          break;
        default:
          cloud.instrument.push_back(p);
      }
    }
  }
  return cloud;
}

Vector3d CircleFit3D::point_at(double angle) const {
  return center + radius * (std::cos(angle) * u + std::sin(angle) * v);
}

Vector3d CircleFit3D::tangent_at(double angle) const {
  return -std::sin(angle) * u + std::cos(angle) * v;
}

double CircleFit3D::angle_of(const Vector3d& p) const {
  const Vector3d w = p - center;
  return std::atan2(w.dot(v), w.dot(u));
}

double CircleFit3D::distance(const Vector3d& p) const {
  const Vector3d w = p - center;
  const double h = w.dot(normal);
  const double radial = (w - h * normal).norm() - radius;
  return std::sqrt(h * h + radial * radial);
}

CircleFit3D fit_circle_3d(const std::vector<Vector3d>& points, const GeometryConfig& cfg,
                          double tube_radius_mm) {
  cfg.validate();
  require(tube_radius_mm >= 0.0, "fit_circle_3d: tube radius must be >= 0");
  require(points.size() >= 3, "fit_circle_3d: need at least 3 points, got " +
                                  std::to_string(points.size()));
  require_not_collinear(points, "fit_circle_3d");

  const std::vector<std::size_t> subset = scoring_subset(points.size(), 20000);
  std::optional<CircleFit3D> best;
  std::size_t best_count = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(cfg.seed);
  const int iterations = points.size() == 3 ? 1 : cfg.ransac_iterations;
  for (int it = 0; it < iterations; ++it) {
    const auto [a, b, c] = points.size() == 3 ? std::array<std::size_t, 3>{0, 1, 2}
                                              : pick3(rng, points.size());
    const std::optional<CircleFit3D> h = circumcircle(points[a], points[b], points[c]);
    if (!h) continue;
    std::size_t count = 0;
    double residual = 0.0;
    for (std::size_t i : subset) {
      const double d = std::abs(h->distance(points[i]) - tube_radius_mm);
      if (d <= cfg.circle_tolerance_mm) {
        ++count;
        residual += d;
      }
    }
    if (count > best_count || (count == best_count && residual < best_residual)) {
      best = h;
      best_count = count;
      best_residual = residual;
    }
  }
  if (!best) throw ValidationError("fit_circle_3d: every sampled triple was degenerate");

  CircleFit3D fit = *best;
  set_basis(fit);
  auto dist = [&](const Vector3d& p) { return std::abs(fit.distance(p) - tube_radius_mm); };
  std::vector<std::size_t> inliers = inliers_of(points, dist, cfg.circle_tolerance_mm);
  for (int round = 0; round < 3; ++round) {
    const std::optional<CircleFit3D> refined = refine_circle(points, inliers);
    if (!refined) break;
    fit = *refined;
    std::vector<std::size_t> next = inliers_of(points, dist, cfg.circle_tolerance_mm);
    if (next == inliers) break;
    if (next.size() < 3) break;
    inliers = std::move(next);
  }
  inliers = inliers_of(points, dist, cfg.circle_tolerance_mm);
  for (int round = 0; round < 2; ++round) {
    geometric_refine(points, inliers, fit, tube_radius_mm);
    std::vector<std::size_t> next = inliers_of(points, dist, cfg.circle_tolerance_mm);
    if (next == inliers || next.size() < 3) break;
    inliers = std::move(next);
  }
  inliers = inliers_of(points, dist, cfg.circle_tolerance_mm);
  fit.inlier_fraction = static_cast<double>(inliers.size()) / points.size();
  fit.low_confidence = fit.inlier_fraction < cfg.min_inlier_fraction;
  set_arc(fit, points, inliers);
  return fit;
}

AxisFit fit_axis(const std::vector<Vector3d>& points, const std::optional<Vector3d>& toward) {
  require(points.size() >= 2, "fit_axis: need at least 2 points, got " +
                                  std::to_string(points.size()));
  const Pca p = pca(points, all_indices(points.size()));
  require(p.sigma(0) > 0.0, "fit_axis: need at least 2 distinct points");
  AxisFit fit;
  fit.point = p.centroid;
  fit.direction = p.axes.col(0).normalized();
  fit.singular_ratio = p.sigma(1) > 0.0 ? p.sigma(0) / p.sigma(1)
                                        : std::numeric_limits<double>::infinity();
  fit.low_confidence = fit.singular_ratio < 1.5;
  if (toward) {
    if (fit.direction.dot(*toward - fit.point) < 0.0) fit.direction = -fit.direction;
  } else {
    Eigen::Index k;
    fit.direction.cwiseAbs().maxCoeff(&k);
    if (fit.direction(k) < 0.0) fit.direction = -fit.direction;
  }
  // Inliers: points within three median radii of the line (at least 1 mm).
  std::vector<double> radial(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vector3d w = points[i] - fit.point;
    radial[i] = (w - w.dot(fit.direction) * fit.direction).norm();
  }
  std::vector<double> sorted = radial;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double limit = std::max(1.0, 3.0 * sorted[sorted.size() / 2]);
  double extreme = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i)
    if (radial[i] <= limit) extreme = std::max(extreme, (points[i] - fit.point).dot(fit.direction));
  fit.tip = fit.point + extreme * fit.direction;
  return fit;
}

Plane fit_pad_plane(const std::vector<Vector3d>& points, const GeometryConfig& cfg) {
  cfg.validate();
  require(points.size() >= 3, "fit_pad_plane: need at least 3 points, got " +
                                  std::to_string(points.size()));
  require_not_collinear(points, "fit_pad_plane");

  const std::vector<std::size_t> subset = scoring_subset(points.size(), 20000);
  std::optional<Plane> best;
  std::size_t best_count = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(derive_seed(cfg.seed, "pad-plane"));
  const int iterations = points.size() == 3 ? 1 : cfg.ransac_iterations;
  for (int it = 0; it < iterations; ++it) {
    const auto [a, b, c] = points.size() == 3 ? std::array<std::size_t, 3>{0, 1, 2}
                                              : pick3(rng, points.size());
    const Vector3d n = (points[b] - points[a]).cross(points[c] - points[a]);
    if (n.norm() < 1e-12) continue;
    Plane h;
    h.normal = n.normalized();
    h.offset = h.normal.dot(points[a]);
    std::size_t count = 0;
    double residual = 0.0;
    for (std::size_t i : subset) {
      const double d = std::abs(h.signed_distance(points[i]));
      if (d <= cfg.plane_tolerance_mm) {
        ++count;
        residual += d;
      }
    }
    if (count > best_count || (count == best_count && residual < best_residual)) {
      best = h;
      best_count = count;
      best_residual = residual;
    }
  }
  if (!best) throw ValidationError("fit_pad_plane: every sampled triple was degenerate");

  Plane plane = *best;
  auto dist = [&](const Vector3d& p) { return std::abs(plane.signed_distance(p)); };
  std::vector<std::size_t> inliers = inliers_of(points, dist, cfg.plane_tolerance_mm);
  for (int round = 0; round < 3 && inliers.size() >= 3; ++round) {
    const Pca p = pca(points, inliers);
    if (p.sigma(1) <= 1e-9 * p.sigma(0)) break;
    plane.normal = p.axes.col(2).normalized();
    plane.offset = plane.normal.dot(p.centroid);
    std::vector<std::size_t> next = inliers_of(points, dist, cfg.plane_tolerance_mm);
    if (next == inliers || next.size() < 3) break;
    inliers = std::move(next);
  }
  if (plane.offset < 0.0) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  plane.inlier_fraction =
      static_cast<double>(inliers_of(points, dist, cfg.plane_tolerance_mm).size()) /
      points.size();
  return plane;
}

SutureMetrics compute_suture_metrics(const CircleFit3D& circle, const AxisFit& axis,
                                     const std::optional<Plane>& pad_plane,
                                     const GeometryConfig& cfg) {
  require(circle.radius > 0.0 && circle.arc_span > 0.0,
          "suture metrics: circle fit has no arc");
  SutureMetrics m;
  m.low_confidence = circle.low_confidence || axis.low_confidence;
  const double a0 = circle.arc_start;
  const double a1 = circle.arc_start + circle.arc_span;
  bool tip_at_start = true;
  if (pad_plane) {
    const double d0 = std::abs(pad_plane->signed_distance(circle.point_at(a0)));
    const double d1 = std::abs(pad_plane->signed_distance(circle.point_at(a1)));
    tip_at_start = d0 <= d1;
    m.tip_ambiguous = std::abs(d0 - d1) < cfg.tip_ambiguity_mm;
  } else {
    m.tip_ambiguous = true;
  }
  m.tip_angle = tip_at_start ? a0 : a1;
  m.tip = circle.point_at(m.tip_angle);

  // Arc position of the point nearest the holder tip, clamped onto the arc.
  double r = wrap_positive(circle.angle_of(axis.tip) - a0);
  if (r > circle.arc_span) r = (r - circle.arc_span) < (kTwoPi - r) ? circle.arc_span : 0.0;
  m.grasp_angle_on_circle = a0 + r;
  m.grasp_point = circle.point_at(m.grasp_angle_on_circle);
  m.grasp_fraction = tip_at_start ? r / circle.arc_span : (circle.arc_span - r) / circle.arc_span;

  const Vector3d chord = (circle.arc_end() - circle.arc_begin()).normalized();
  m.grasp_angle_deg = rad2deg(std::acos(std::abs(clamp_unit(chord.dot(axis.direction)))));
  m.plane_instrument_angle_deg =
      90.0 - rad2deg(std::acos(std::abs(clamp_unit(circle.normal.dot(axis.direction)))));
  if (pad_plane) {
    const Vector3d forward = tip_at_start ? -circle.tangent_at(a0) : circle.tangent_at(a1);
    m.entry_angle_deg =
        rad2deg(std::asin(std::abs(clamp_unit(forward.dot(pad_plane->normal)))));
    m.entry_angle_ok = *m.entry_angle_deg >= kEntryAngleLow;
  }
  m.grasp_fraction_ok =
      m.grasp_fraction >= kGraspFractionLow && m.grasp_fraction <= kGraspFractionHigh;
  m.grasp_angle_ok = m.grasp_angle_deg >= kGraspAngleFoldedLow;
  return m;
}

bool extend_occluded_arc(CircleFit3D& circle, const cv::Mat& depth_mm, const cv::Mat& seg,
                         const CameraModel& camera, const GeometryConfig& cfg) {
  const double nominal = deg2rad(cfg.needle_arc_deg);
  const double missing = nominal - circle.arc_span;
  if (nominal <= 0.0 || missing < deg2rad(2.0)) return false;
  // Probe a few degrees past an end: hidden when a probe lands on the holder in front.
  const auto hidden = [&](double end, double outward) {
    for (int k = 1; k <= 4; ++k) {
      const Vector3d p = circle.point_at(end + outward * deg2rad(k));
      if (p.z() <= 0.0) continue;
      const Eigen::Vector2d px = camera.project(p);
      const int u = static_cast<int>(std::lround(px.x()));
      const int v = static_cast<int>(std::lround(px.y()));
      if (u < 0 || v < 0 || u >= seg.cols || v >= seg.rows) continue;
      const float d = depth_mm.at<float>(v, u);
      if (seg.at<std::uint8_t>(v, u) == 2 && d > 0.0f && d < p.z()) return true;
    }
    return false;
  };
  const bool start_hidden = hidden(circle.arc_start, -1.0);
  const bool end_hidden = hidden(circle.arc_start + circle.arc_span, 1.0);
  if (start_hidden == end_hidden) return false;
  if (start_hidden) circle.arc_start -= missing;
  circle.arc_span = nominal;
  circle.arc_extended = true;
  return true;
}

FrameGeometry analyze_frame(const cv::Mat& depth_mm, const cv::Mat& seg, const CameraModel& camera,
                            const GeometryConfig& cfg) {
  cfg.validate();
  LabeledPointCloud cloud = backproject(depth_mm, seg, camera);
  FrameGeometry g;
  g.needle_points = cloud.needle.size();
  g.instrument_points = cloud.instrument.size();
  if (cfg.instrument_surface_offset_mm > 0.0)
    for (Vector3d& p : cloud.instrument) p += cfg.instrument_surface_offset_mm * p.normalized();

  const auto enough = [&](const std::vector<Vector3d>& pts) {
    return pts.size() >= static_cast<std::size_t>(cfg.min_points);
  };
  if (enough(cloud.needle)) {
    try {
      g.circle = fit_circle_3d(cloud.needle, cfg, cfg.wire_radius_mm);
      extend_occluded_arc(*g.circle, depth_mm, seg, camera, cfg);
    } catch (const ValidationError&) {
    }
  }
  if (enough(cloud.background)) {
    try {
      g.pad_plane = fit_pad_plane(cloud.background, cfg);
    } catch (const ValidationError&) {
    }
  }
  if (enough(cloud.instrument)) {
    std::optional<Vector3d> toward;
    if (g.circle) {
      toward = g.circle->center;
    } else if (!cloud.needle.empty()) {
      Vector3d c = Vector3d::Zero();
      for (const Vector3d& p : cloud.needle) c += p;
      toward = c / static_cast<double>(cloud.needle.size());
    }
    try {
      g.axis = fit_axis(cloud.instrument, toward);
    } catch (const ValidationError&) {
    }
  }
  if (g.circle && g.axis && g.circle->arc_span > 0.0)
    g.metrics = compute_suture_metrics(*g.circle, *g.axis, g.pad_plane, cfg);
  return g;
}

namespace {

nlohmann::json vec(const Vector3d& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace

nlohmann::json geometry_to_json(const FrameGeometry& g) {
  nlohmann::json j;
  j["needle_points"] = g.needle_points;
  j["instrument_points"] = g.instrument_points;
  j["circle"] = nullptr;
  j["axis"] = nullptr;
  j["pad_plane"] = nullptr;
  j["metrics"] = nullptr;
  if (g.circle) {
    const CircleFit3D& c = *g.circle;
    j["circle"] = {{"center_mm", vec(c.center)},
                   {"normal", vec(c.normal)},
                   {"radius_mm", c.radius},
                   {"inlier_fraction", c.inlier_fraction},
                   {"arc_begin_mm", vec(c.arc_begin())},
                   {"arc_end_mm", vec(c.arc_end())},
                   {"arc_span_deg", rad2deg(c.arc_span)},
                   {"arc_extended", c.arc_extended},
                   {"low_confidence", c.low_confidence}};
  }
  if (g.axis) {
    j["axis"] = {{"point_mm", vec(g.axis->point)},
                 {"direction", vec(g.axis->direction)},
                 {"tip_mm", vec(g.axis->tip)},
                 {"singular_ratio", g.axis->singular_ratio},
                 {"low_confidence", g.axis->low_confidence}};
  }
  if (g.pad_plane) {
    j["pad_plane"] = {{"normal", vec(g.pad_plane->normal)},
                      {"offset_mm", g.pad_plane->offset},
                      {"inlier_fraction", g.pad_plane->inlier_fraction}};
  }
  if (g.metrics) {
    const SutureMetrics& m = *g.metrics;
    j["metrics"] = {{"grasp_fraction", m.grasp_fraction},
                    {"grasp_angle_deg", m.grasp_angle_deg},
                    {"plane_instrument_angle_deg", m.plane_instrument_angle_deg},
                    {"tip_mm", vec(m.tip)},
                    {"grasp_point_mm", vec(m.grasp_point)},
                    {"tip_ambiguous", m.tip_ambiguous},
                    {"low_confidence", m.low_confidence},
                    {"grasp_fraction_ok", m.grasp_fraction_ok},
                    {"grasp_angle_ok", m.grasp_angle_ok}};
    j["metrics"]["entry_angle_deg"] =
        m.entry_angle_deg ? nlohmann::json(*m.entry_angle_deg) : nlohmann::json();
    j["metrics"]["entry_angle_ok"] =
        m.entry_angle_ok ? nlohmann::json(*m.entry_angle_ok) : nlohmann::json();
  }
  return j;
}

}  // namespace suture
