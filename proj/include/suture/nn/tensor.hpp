#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace suture::nn {

/// Storage aligned to Eigen's widest packet so vectorized reductions over mapped buffers
/// always peel the same way; otherwise results vary with the heap address.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const MatrixRM<T>>;

/// Dense NCHW tensor.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, T fill = T(0))
      : shape_{n, c, h, w}, data_(static_cast<std::size_t>(n) * c * h * w, fill) {}

  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }
  const std::array<int, 4>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t plane() const { return static_cast<std::size_t>(shape_[2]) * shape_[3]; }
  std::size_t sample_size() const { return plane() * shape_[1]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* sample(int i) { return data_.data() + i * sample_size(); }
  const T* sample(int i) const { return data_.data() + i * sample_size(); }
  T* channel(int i, int ch) { return sample(i) + ch * plane(); }
  const T* channel(int i, int ch) const { return sample(i) + ch * plane(); }

  T& operator()(int i, int ch, int y, int x) {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + ch) * shape_[2] + y) * shape_[3] + x];
  }
  const T& operator()(int i, int ch, int y, int x) const {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + ch) * shape_[2] + y) * shape_[3] + x];
  }

  /// Sample i viewed as a (C x H*W) row-major matrix.
  MatMap<T> matrix(int i) { return MatMap<T>(sample(i), c(), static_cast<Eigen::Index>(plane())); }
  ConstMatMap<T> matrix(int i) const {
    return ConstMatMap<T>(sample(i), c(), static_cast<Eigen::Index>(plane()));
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void release() {
    data_.clear();
    data_.shrink_to_fit();
    shape_ = {0, 0, 0, 0};
  }

 private:
  std::array<int, 4> shape_{0, 0, 0, 0};
  AlignedVector<T> data_;
};

}  // namespace suture::nn
