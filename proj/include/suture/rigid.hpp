#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace suture {

/// Rotation (unit quaternion) followed by translation in mm; maps local to parent coordinates.
struct RigidTransform {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const { return rotation * v; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.conjugate();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation = (rotation * rhs.rotation).normalized();
    out.translation = rotation * rhs.translation + translation;
    return out;
  }

  bool operator==(const RigidTransform& o) const {
    return rotation.coeffs() == o.rotation.coeffs() && translation == o.translation;
  }
};

/// Intrinsic Z-Y-X Euler angles in degrees: R = Rz(rz) * Ry(ry) * Rx(rx).
Eigen::Quaterniond quaternion_from_euler_deg(double rx, double ry, double rz);

/// Rotation whose columns are the given orthonormal axes (right-handed).
Eigen::Quaterniond quaternion_from_axes(const Eigen::Vector3d& x, const Eigen::Vector3d& y,
                                        const Eigen::Vector3d& z);

/// Camera-to-world pose for a camera at `eye` looking at `target` (OpenCV axes).
RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up);

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace suture
