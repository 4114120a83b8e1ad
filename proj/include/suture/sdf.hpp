#pragma once

// Exact signed distance functions for the analytic scene primitives.
// All distances in mm, evaluated in the primitive's local frame.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace suture::sdf {

/// Tube of radius `wire` around a circular arc of radius `radius` in the local
/// xy-plane, spanning angles [0, arc_angle] (counter-clockwise from +x), with
/// spherical end caps.
inline double torus_segment(const Eigen::Vector3d& p, double radius, double wire,
                            double arc_angle) {
  const double rho = std::hypot(p.x(), p.y());
  double theta = std::atan2(p.y(), p.x());
  if (theta < 0.0) theta += 2.0 * 3.14159265358979323846;
  if (theta <= arc_angle) return std::hypot(rho - radius, p.z()) - wire;
  const Eigen::Vector3d e0(radius, 0.0, 0.0);
  const Eigen::Vector3d e1(radius * std::cos(arc_angle), radius * std::sin(arc_angle), 0.0);
  return std::min((p - e0).norm(), (p - e1).norm()) - wire;
}

inline double capsule(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                      const Eigen::Vector3d& b, double r) {
  const Eigen::Vector3d pa = p - a;
  const Eigen::Vector3d ba = b - a;
  const double h = std::clamp(pa.dot(ba) / ba.squaredNorm(), 0.0, 1.0);
  return (pa - ba * h).norm() - r;
}

/// Flat-capped cylinder with axis segment a-b.
inline double capped_cylinder(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b, double r) {
  const Eigen::Vector3d ba = b - a;
  const Eigen::Vector3d pa = p - a;
  const double baba = ba.squaredNorm();
  const double paba = pa.dot(ba);
  const double x = (pa * baba - ba * paba).norm() - r * baba;
  const double y = std::abs(paba - baba * 0.5) - baba * 0.5;
  const double x2 = x * x;
  const double y2 = y * y * baba;
  const double d = (std::max(x, y) < 0.0)
                       ? -std::min(x2, y2)
                       : (((x > 0.0) ? x2 : 0.0) + ((y > 0.0) ? y2 : 0.0));
  return std::copysign(std::sqrt(std::abs(d)), d) / baba;
}

/// Box centered at the origin with half extents `half`, edges rounded by `r`.
inline double rounded_box(const Eigen::Vector3d& p, const Eigen::Vector3d& half, double r) {
  const Eigen::Vector3d q = p.cwiseAbs() - (half - Eigen::Vector3d::Constant(r));
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0) - r;
}

}  // namespace suture::sdf
