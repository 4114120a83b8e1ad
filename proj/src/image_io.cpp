#include "suture/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "suture/error.hpp"

namespace suture {
namespace {

void write_png(const std::filesystem::path& path, const cv::Mat& image) {
  // Compression level is fixed so identical inputs give identical bytes.
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), image, params);
  } catch (const cv::Exception& e) {
    throw IoError(std::string("cannot write PNG (") + e.what() + ")", path);
  }
  if (!ok) throw IoError("cannot write PNG", path);
}

cv::Mat read_png(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) throw IoError("missing image file", path);
  cv::Mat image = cv::imread(path.string(), flags);
  if (image.empty()) throw IoError("cannot decode image", path);
  return image;
}

}  // namespace

void write_rgb_png(const std::filesystem::path& path, const cv::Mat& rgb) {
  require(rgb.type() == CV_8UC3, "write_rgb_png: expected CV_8UC3");
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  write_png(path, bgr);
}

cv::Mat read_rgb_png(const std::filesystem::path& path) {
  cv::Mat bgr = read_png(path, cv::IMREAD_COLOR);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

cv::Mat quantize_depth(const cv::Mat& depth_mm) {
  require(depth_mm.type() == CV_32F, "depth map must be CV_32F");
  cv::Mat out(depth_mm.size(), CV_32F);
  for (int y = 0; y < depth_mm.rows; ++y) {
    for (int x = 0; x < depth_mm.cols; ++x) {
      const double q = std::clamp(std::round(depth_mm.at<float>(y, x) * 10.0), 0.0, 65535.0);
      out.at<float>(y, x) = static_cast<float>(q / 10.0);
    }
  }
  return out;
}

void write_depth_png(const std::filesystem::path& path, const cv::Mat& depth_mm) {
  require(depth_mm.type() == CV_32F, "write_depth_png: expected CV_32F depth");
  cv::Mat encoded(depth_mm.size(), CV_16U);
  for (int y = 0; y < depth_mm.rows; ++y) {
    for (int x = 0; x < depth_mm.cols; ++x) {
      const double q = std::round(depth_mm.at<float>(y, x) * 10.0);
      encoded.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
    }
  }
  write_png(path, encoded);
}

cv::Mat read_depth_png(const std::filesystem::path& path) {
  cv::Mat encoded = read_png(path, cv::IMREAD_ANYDEPTH);
  if (encoded.type() != CV_16U) throw IoError("depth PNG is not 16-bit grayscale", path);
  cv::Mat depth(encoded.size(), CV_32F);
  for (int y = 0; y < encoded.rows; ++y)
    for (int x = 0; x < encoded.cols; ++x)
      depth.at<float>(y, x) = static_cast<float>(encoded.at<std::uint16_t>(y, x) / 10.0);
  return depth;
}

void write_seg_png(const std::filesystem::path& path, const cv::Mat& seg) {
  require(seg.type() == CV_8U, "write_seg_png: expected CV_8U");
  write_png(path, seg);
}

cv::Mat read_seg_png(const std::filesystem::path& path) {
  cv::Mat seg = read_png(path, cv::IMREAD_GRAYSCALE);
  double max_value = 0.0;
  cv::minMaxLoc(seg, nullptr, &max_value);
  if (max_value > 2.0) throw IoError("segmentation PNG contains class ids outside {0,1,2}", path);
  return seg;
}

}  // namespace suture
