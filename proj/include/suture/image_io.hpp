#pragma once

#include <filesystem>

#include <opencv2/core.hpp>

namespace suture {

// RGB images are CV_8UC3 in RGB channel order in memory.
void write_rgb_png(const std::filesystem::path& path, const cv::Mat& rgb);
cv::Mat read_rgb_png(const std::filesystem::path& path);

/// 16-bit PNG storing round(depth_mm * 10); 0 stays the no-hit sentinel.
void write_depth_png(const std::filesystem::path& path, const cv::Mat& depth_mm);
/// Returns CV_32F depth in mm.
cv::Mat read_depth_png(const std::filesystem::path& path);
/// The value write_depth_png followed by read_depth_png yields.
cv::Mat quantize_depth(const cv::Mat& depth_mm);

/// 8-bit class-id PNG; reading rejects ids outside {0, 1, 2}.
void write_seg_png(const std::filesystem::path& path, const cv::Mat& seg);
cv::Mat read_seg_png(const std::filesystem::path& path);

}  // namespace suture
