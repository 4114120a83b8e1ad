#pragma once

#include <Eigen/Core>

namespace suture {

/// Pinhole camera, OpenCV axis convention (x right, y down, z forward).
/// Pixel (u, v) refers to the pixel center at integer coordinates.
struct CameraModel {
  int width = 640;
  int height = 480;
  double fx = 800.0;
  double fy = 800.0;
  double cx = 319.5;
  double cy = 239.5;
  double near = 10.0;   // mm
  double far = 400.0;   // mm

  void validate() const;

  Eigen::Vector3d backproject(double u, double v, double z) const {
    return {(u - cx) * z / fx, (v - cy) * z / fy, z};
  }
  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
  bool in_bounds(const Eigen::Vector2d& px) const {
    return px.x() > -0.5 && px.y() > -0.5 && px.x() < width - 0.5 && px.y() < height - 0.5;
  }

  /// Intrinsics after an image resize to new_width x new_height (pixel-center aligned).
  CameraModel resized(int new_width, int new_height) const;
  /// Intrinsics after keeping columns [x_offset, x_offset + new_width).
  CameraModel cropped_x(int x_offset, int new_width) const;

  bool operator==(const CameraModel&) const = default;
};

}  // namespace suture
