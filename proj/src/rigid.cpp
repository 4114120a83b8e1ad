#include "suture/rigid.hpp"

namespace suture {

Eigen::Quaterniond quaternion_from_euler_deg(double rx, double ry, double rz) {
  const Eigen::Quaterniond q = Eigen::AngleAxisd(deg2rad(rz), Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(deg2rad(ry), Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(deg2rad(rx), Eigen::Vector3d::UnitX());
  return q.normalized();
}

Eigen::Quaterniond quaternion_from_axes(const Eigen::Vector3d& x, const Eigen::Vector3d& y,
                                        const Eigen::Vector3d& z) {
  Eigen::Matrix3d m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  return Eigen::Quaterniond(m).normalized();
}

RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up) {
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  RigidTransform pose;
  pose.rotation = quaternion_from_axes(x, y, z);
  pose.translation = eye;
  return pose;
}

}  // namespace suture
