#include "suture/overlay.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "suture/error.hpp"
#include "suture/rigid.hpp"

namespace suture {

namespace {

constexpr int kShift = 4;  // sub-pixel bits for cv drawing
constexpr double kScale = 1 << kShift;

// Colors are RGB because frames are held in RGB order.
const cv::Scalar kWhite(255, 255, 255);
const cv::Scalar kThirdColors[3] = {cv::Scalar(230, 60, 60), cv::Scalar(240, 200, 40),
                                    cv::Scalar(70, 130, 240)};
const cv::Scalar kGraspBand(40, 230, 90);
const cv::Scalar kPlaneColor(120, 200, 255);
const cv::Scalar kAxisColors[3] = {cv::Scalar(255, 80, 80), cv::Scalar(80, 255, 80),
                                   cv::Scalar(80, 80, 255)};
const cv::Scalar kPass(60, 220, 60);
const cv::Scalar kFail(240, 60, 60);

struct Projector {
  const CameraModel& camera;

  bool visible(const Vector3d& p) const { return p.z() > camera.near; }
  cv::Point fixed(const Vector3d& p) const {
    const Eigen::Vector2d px = camera.project(p);
    return {static_cast<int>(std::lround(px.x() * kScale)),
            static_cast<int>(std::lround(px.y() * kScale))};
  }
};

void polyline(cv::Mat& img, const Projector& proj, const std::vector<Vector3d>& pts,
              const cv::Scalar& color, int thickness, bool dashed) {
  for (std::size_t k = 1; k < pts.size(); ++k) {
    if (dashed && (k / 3) % 2 == 1) continue;
    if (!proj.visible(pts[k - 1]) || !proj.visible(pts[k])) continue;
    cv::line(img, proj.fixed(pts[k - 1]), proj.fixed(pts[k]), color, thickness, cv::LINE_AA,
             kShift);
  }
}

std::vector<Vector3d> arc_points(const CircleFit3D& c, double from, double to, int samples) {
  std::vector<Vector3d> pts;
  for (int k = 0; k <= samples; ++k) pts.push_back(c.point_at(from + (to - from) * k / samples));
  return pts;
}

void draw_banner(cv::Mat& img, const std::string& text, const cv::Scalar& color) {
  const int h = overlay_banner_height(img);
  cv::rectangle(img, cv::Rect(0, 0, img.cols, h), cv::Scalar(0, 0, 0), cv::FILLED);
  const double scale = h / 40.0;
  int baseline = 0;
  const cv::Size size = cv::getTextSize(text, cv::FONT_HERSHEY_SIMPLEX, scale, 2, &baseline);
  cv::putText(img, text, cv::Point((img.cols - size.width) / 2, (h + size.height) / 2),
              cv::FONT_HERSHEY_SIMPLEX, scale, color, 2, cv::LINE_AA);
}

std::string pass_fail(bool ok) { return ok ? "PASS" : "FAIL"; }

void draw_text_block(cv::Mat& img, const std::vector<std::pair<std::string, cv::Scalar>>& lines) {
  const double scale = std::max(0.35, img.rows / 1200.0);
  const int line_h = static_cast<int>(std::lround(28 * scale)) + 4;
  const int top = overlay_banner_height(img) + 6;
  const int width = static_cast<int>(std::lround(560 * scale));
  cv::Mat roi = img(cv::Rect(0, top - 4, std::min(width, img.cols),
                             std::min(line_h * static_cast<int>(lines.size()) + 8,
                                      img.rows - top + 4)));
  roi *= 0.4;
  for (std::size_t k = 0; k < lines.size(); ++k)
    cv::putText(img, lines[k].first, cv::Point(6, top + line_h * static_cast<int>(k + 1) - 6),
                cv::FONT_HERSHEY_SIMPLEX, scale, lines[k].second, 1, cv::LINE_AA);
}

}  // namespace

int overlay_banner_height(const cv::Mat& rgb) { return std::max(16, rgb.rows / 16); }

cv::Mat render_overlay(const cv::Mat& rgb, const CameraModel& camera, const FrameGeometry& geometry,
                       const OverlayStyle& style) {
  require(rgb.type() == CV_8UC3, "render_overlay: expected an 8-bit 3-channel frame");
  require(rgb.cols == camera.width && rgb.rows == camera.height,
          "render_overlay: frame size does not match the camera");
  cv::Mat out = rgb.clone();
  if (!geometry.circle) {
    draw_banner(out, "NO DETECTION", kFail);
    return out;
  }
  const Projector proj{camera};
  const CircleFit3D& c = *geometry.circle;
  const int t = style.line_thickness;

  // Translucent needle-plane quad.
  {
    const double s = style.plane_half_size_factor * c.radius;
    const Vector3d corners[4] = {c.center + s * (c.u + c.v), c.center + s * (-c.u + c.v),
                                 c.center + s * (-c.u - c.v), c.center + s * (c.u - c.v)};
    bool ok = true;
    std::vector<cv::Point> poly;
    for (const Vector3d& p : corners) {
      ok = ok && proj.visible(p);
      poly.push_back(proj.fixed(p));
    }
    if (ok) {
      cv::Mat layer = out.clone();
      cv::fillPoly(layer, std::vector<std::vector<cv::Point>>{poly}, kPlaneColor, cv::LINE_AA,
                   kShift);
      cv::addWeighted(layer, style.plane_alpha, out, 1.0 - style.plane_alpha, 0.0, out);
    }
  }

  polyline(out, proj, arc_points(c, 0.0, 2.0 * kPi, 180), kWhite, 1, c.low_confidence);

  // Arc thirds, ordered from the tip when metrics are known.
  const std::optional<SutureMetrics>& m = geometry.metrics;
  const bool from_end = m && m->tip_angle != c.arc_start;
  auto arc_angle = [&](double fraction) {
    return from_end ? c.arc_start + c.arc_span * (1.0 - fraction)
                    : c.arc_start + c.arc_span * fraction;
  };
  for (int k = 0; k < 3; ++k)
    polyline(out, proj, arc_points(c, arc_angle(k / 3.0), arc_angle((k + 1) / 3.0), 30),
             kThirdColors[k], t + 1, c.low_confidence);
  polyline(out, proj, arc_points(c, arc_angle(kGraspFractionLow), arc_angle(kGraspFractionHigh), 12),
           kGraspBand, t + 3, c.low_confidence);

  if (proj.visible(c.center)) {
    const cv::Point ctr = proj.fixed(c.center);
    const int r = static_cast<int>(6 * kScale);
    cv::circle(out, ctr, r, kWhite, t, cv::LINE_AA, kShift);
    cv::line(out, ctr - cv::Point(r, 0), ctr + cv::Point(r, 0), kWhite, 1, cv::LINE_AA, kShift);
    cv::line(out, ctr - cv::Point(0, r), ctr + cv::Point(0, r), kWhite, 1, cv::LINE_AA, kShift);
  }

  if (geometry.axis) {
    const AxisFit& a = *geometry.axis;
    const Vector3d helper = std::abs(a.direction.z()) < 0.9 ? Vector3d::UnitZ() : Vector3d::UnitX();
    const Vector3d e1 = a.direction.cross(helper).normalized();
    const Vector3d e2 = a.direction.cross(e1);
    polyline(out, proj, {a.tip - style.axis_length_mm * a.direction, a.tip}, kAxisColors[0], t,
             a.low_confidence);
    polyline(out, proj, {a.tip, a.tip + style.triad_length_mm * e1}, kAxisColors[1], t,
             a.low_confidence);
    polyline(out, proj, {a.tip, a.tip + style.triad_length_mm * e2}, kAxisColors[2], t,
             a.low_confidence);
  }

  std::vector<std::pair<std::string, cv::Scalar>> lines;
  char buf[128];
  std::snprintf(buf, sizeof buf, "radius %.2f mm  inliers %.0f%%%s", c.radius,
                100.0 * c.inlier_fraction, c.low_confidence ? "  (low confidence)" : "");
  lines.emplace_back(buf, kWhite);
  if (m) {
    std::snprintf(buf, sizeof buf, "grasp fraction %.2f [0.60-0.73] %s", m->grasp_fraction,
                  pass_fail(m->grasp_fraction_ok).c_str());
    lines.emplace_back(buf, m->grasp_fraction_ok ? kPass : kFail);
    std::snprintf(buf, sizeof buf, "grasp angle %.1f deg [60-90 folded] %s", m->grasp_angle_deg,
                  pass_fail(m->grasp_angle_ok).c_str());
    lines.emplace_back(buf, m->grasp_angle_ok ? kPass : kFail);
    std::snprintf(buf, sizeof buf, "plane/instrument %.1f deg", m->plane_instrument_angle_deg);
    lines.emplace_back(buf, kWhite);
    if (m->entry_angle_deg) {
      std::snprintf(buf, sizeof buf, "entry angle %.1f deg [80-90] %s", *m->entry_angle_deg,
                    pass_fail(*m->entry_angle_ok).c_str());
      lines.emplace_back(buf, *m->entry_angle_ok ? kPass : kFail);
    }
    if (m->tip_ambiguous) lines.emplace_back("tip/tail ambiguous", kFail);
  } else {
    lines.emplace_back("no instrument axis", kFail);
  }
  draw_text_block(out, lines);
  return out;
}

}  // namespace suture
