#include "suture/camera.hpp"

#include "suture/error.hpp"

namespace suture {

void CameraModel::validate() const {
  require(width > 0 && height > 0, "camera: width and height must be positive");
  require(fx > 0 && fy > 0, "camera: focal lengths must be positive");
  require(near > 0 && near < far, "camera: need 0 < near < far");
  require(far * 10.0 <= 65535.0, "camera: far exceeds the 16-bit depth encoding range (6553.5 mm)");
}

CameraModel CameraModel::resized(int new_width, int new_height) const {
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  CameraModel out = *this;
  out.width = new_width;
  out.height = new_height;
  out.fx = fx * sx;
  out.fy = fy * sy;
  out.cx = (cx + 0.5) * sx - 0.5;
  out.cy = (cy + 0.5) * sy - 0.5;
  return out;
}

CameraModel CameraModel::cropped_x(int x_offset, int new_width) const {
  CameraModel out = *this;
  out.width = new_width;
  out.cx = cx - x_offset;
  return out;
}

}  // namespace suture
