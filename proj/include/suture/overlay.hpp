#pragma once

#include <opencv2/core.hpp>

#include "suture/camera.hpp"
#include "suture/geometry.hpp"

namespace suture {

struct OverlayStyle {
  double plane_alpha = 0.25;
  double plane_half_size_factor = 1.3;  // quad half-size in circle radii
  double axis_length_mm = 30.0;
  double triad_length_mm = 8.0;
  int line_thickness = 2;
};

/// Draws the fits over an RGB frame: circle polyline, arc thirds with the recommended
/// grasp band highlighted, rotation-center marker, translucent needle-plane quad, holder
/// axis triad and a metrics text block. Low-confidence fits are drawn dashed. Without a
/// circle fit the frame is returned with a "NO DETECTION" banner only.
cv::Mat render_overlay(const cv::Mat& rgb, const CameraModel& camera, const FrameGeometry& geometry,
                       const OverlayStyle& style = {});

/// Height in pixels of the top banner band written by render_overlay.
int overlay_banner_height(const cv::Mat& rgb);

}  // namespace suture
