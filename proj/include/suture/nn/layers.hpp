#pragma once

// Forward/backward kernels for the U-Net building blocks. Weights are flat
// row-major buffers; gradients accumulate (callers zero them).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "suture/error.hpp"
#include "suture/nn/tensor.hpp"

namespace suture::nn {

// --- 3x3 convolution, stride 1, zero padding 1 ------------------------------

/// col is (C*9) x (H*W): row c*9 + ky*3 + kx holds x[c, y+ky-1, x+kx-1].
template <typename T>
void im2col3x3(const T* x, int channels, int height, int width, T* col) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    const T* plane = x + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dx = kx - 1;
        for (int y = 0; y < height; ++y) {
          const int iy = y + ky - 1;
          T* out = row + static_cast<std::size_t>(y) * width;
          if (iy < 0 || iy >= height) {
            std::fill(out, out + width, T(0));
            continue;
          }
          const T* in = plane + static_cast<std::size_t>(iy) * width;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(width, width - dx);
          std::fill(out, out + x0, T(0));
          std::copy(in + x0 + dx, in + x1 + dx, out + x0);
          std::fill(out + x1, out + width, T(0));
        }
      }
    }
  }
}

/// Adjoint of im2col3x3: accumulates col into x.
template <typename T>
void col2im3x3(const T* col, int channels, int height, int width, T* x) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    T* plane = x + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
        const int dx = kx - 1;
        for (int y = 0; y < height; ++y) {
          const int iy = y + ky - 1;
          if (iy < 0 || iy >= height) continue;
          const T* in = row + static_cast<std::size_t>(y) * width;
          T* out = plane + static_cast<std::size_t>(iy) * width;
          const int x0 = std::max(0, -dx);
          const int x1 = std::min(width, width - dx);
          for (int xx = x0; xx < x1; ++xx) out[xx + dx] += in[xx];
        }
      }
    }
  }
}

/// weight: Cout x (Cin*9), bias: Cout.
template <typename T>
Tensor<T> conv3x3_forward(const Tensor<T>& x, const T* weight, const T* bias, int out_channels) {
  const int cin = x.c();
  const auto hw = static_cast<Eigen::Index>(x.plane());
  Tensor<T> y(x.n(), out_channels, x.h(), x.w());
  AlignedVector<T> col(static_cast<std::size_t>(cin) * 9 * hw);
  ConstMatMap<T> w(weight, out_channels, cin * 9);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias, out_channels);
  for (int i = 0; i < x.n(); ++i) {
    im2col3x3(x.sample(i), cin, x.h(), x.w(), col.data());
    auto out = y.matrix(i);
    out.noalias() = w * ConstMatMap<T>(col.data(), cin * 9, hw);
    out.colwise() += b;
  }
  return y;
}

/// dx may be null (first layer).
template <typename T>
void conv3x3_backward(const Tensor<T>& x, const T* weight, const Tensor<T>& dy, Tensor<T>* dx,
                      T* dweight, T* dbias) {
  const int cin = x.c();
  const int cout = dy.c();
  const auto hw = static_cast<Eigen::Index>(x.plane());
  AlignedVector<T> col(static_cast<std::size_t>(cin) * 9 * hw);
  ConstMatMap<T> w(weight, cout, cin * 9);
  MatMap<T> dw(dweight, cout, cin * 9);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(dbias, cout);
  if (dx) *dx = Tensor<T>(x.n(), cin, x.h(), x.w());
  for (int i = 0; i < x.n(); ++i) {
    im2col3x3(x.sample(i), cin, x.h(), x.w(), col.data());
    const auto g = dy.matrix(i);
    dw.noalias() += g * ConstMatMap<T>(col.data(), cin * 9, hw).transpose();
    db += g.rowwise().sum();
    if (dx) {
      MatMap<T>(col.data(), cin * 9, hw).noalias() = w.transpose() * g;
      col2im3x3(col.data(), cin, x.h(), x.w(), dx->sample(i));
    }
  }
}

// --- 1x1 convolution ----------------------------------------------------------

template <typename T>
Tensor<T> conv1x1_forward(const Tensor<T>& x, const T* weight, const T* bias, int out_channels) {
  Tensor<T> y(x.n(), out_channels, x.h(), x.w());
  ConstMatMap<T> w(weight, out_channels, x.c());
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias, out_channels);
  for (int i = 0; i < x.n(); ++i) {
    auto out = y.matrix(i);
    out.noalias() = w * x.matrix(i);
    out.colwise() += b;
  }
  return y;
}

template <typename T>
void conv1x1_backward(const Tensor<T>& x, const T* weight, const Tensor<T>& dy, Tensor<T>* dx,
                      T* dweight, T* dbias) {
  ConstMatMap<T> w(weight, dy.c(), x.c());
  MatMap<T> dw(dweight, dy.c(), x.c());
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(dbias, dy.c());
  if (dx) *dx = Tensor<T>(x.n(), x.c(), x.h(), x.w());
  for (int i = 0; i < x.n(); ++i) {
    const auto g = dy.matrix(i);
    dw.noalias() += g * x.matrix(i).transpose();
    db += g.rowwise().sum();
    if (dx) dx->matrix(i).noalias() = w.transpose() * g;
  }
}

// --- Batch normalization + LeakyReLU -----------------------------------------

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormCache {
  std::vector<T> mean;
  std::vector<T> inv_std;
};

template <typename T>
T leaky(T v, T slope) {
  return v > T(0) ? v : v * slope;
}

/// Normalizes z per channel and applies LeakyReLU. In training mode batch statistics are
/// used (and folded into the running buffers when given); otherwise the running buffers.
template <typename T>
Tensor<T> batchnorm_leaky_forward(const Tensor<T>& z, const T* gamma, const T* beta,
                                  const T* running_mean, const T* running_var, bool training,
                                  T slope, BatchNormCache<T>* cache, T* running_mean_out,
                                  T* running_var_out) {
  const int channels = z.c();
  const std::size_t hw = z.plane();
  const double count = static_cast<double>(z.n()) * hw;
  Tensor<T> a(z.n(), channels, z.h(), z.w());
  if (cache) {
    cache->mean.assign(channels, T(0));
    cache->inv_std.assign(channels, T(0));
  }
  for (int c = 0; c < channels; ++c) {
    T mean;
    T inv_std;
    if (training) {
      double sum = 0.0;
      for (int i = 0; i < z.n(); ++i) {
        const T* p = z.channel(i, c);
        for (std::size_t k = 0; k < hw; ++k) sum += p[k];
      }
      const double mu = sum / count;
      double sq = 0.0;
      for (int i = 0; i < z.n(); ++i) {
        const T* p = z.channel(i, c);
        for (std::size_t k = 0; k < hw; ++k) sq += (p[k] - mu) * (p[k] - mu);
      }
      const double var = sq / count;
      mean = static_cast<T>(mu);
      inv_std = static_cast<T>(1.0 / std::sqrt(var + kBatchNormEps));
      if (running_mean_out) {
        const double unbiased = count > 1 ? sq / (count - 1) : var;
        running_mean_out[c] = static_cast<T>((1 - kBatchNormMomentum) * running_mean[c] +
                                             kBatchNormMomentum * mu);
        running_var_out[c] = static_cast<T>((1 - kBatchNormMomentum) * running_var[c] +
                                            kBatchNormMomentum * unbiased);
      }
    } else {
      mean = running_mean[c];
      inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + kBatchNormEps));
    }
    if (cache) {
      cache->mean[c] = mean;
      cache->inv_std[c] = inv_std;
    }
    const T scale = gamma[c] * inv_std;
    const T shift = beta[c] - mean * scale;
    for (int i = 0; i < z.n(); ++i) {
      const T* p = z.channel(i, c);
      T* q = a.channel(i, c);
      for (std::size_t k = 0; k < hw; ++k) q[k] = leaky(p[k] * scale + shift, slope);
    }
  }
  return a;
}

/// Backward through LeakyReLU and training-mode batch norm. `a` is the forward output.
template <typename T>
Tensor<T> batchnorm_leaky_backward(const Tensor<T>& z, const Tensor<T>& a, const Tensor<T>& da,
                                   const T* gamma, const BatchNormCache<T>& cache, T slope,
                                   T* dgamma, T* dbeta) {
  const int channels = z.c();
  const std::size_t hw = z.plane();
  const double count = static_cast<double>(z.n()) * hw;
  Tensor<T> dz(z.n(), channels, z.h(), z.w());
  for (int c = 0; c < channels; ++c) {
    const T mean = cache.mean[c];
    const T inv_std = cache.inv_std[c];
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int i = 0; i < z.n(); ++i) {
      const T* zp = z.channel(i, c);
      const T* ap = a.channel(i, c);
      const T* g = da.channel(i, c);
      T* out = dz.channel(i, c);
      for (std::size_t k = 0; k < hw; ++k) {
        const T dy = ap[k] > T(0) ? g[k] : g[k] * slope;
        out[k] = dy;  // stash dL/dy, rewritten below
        sum_dy += dy;
        sum_dy_xhat += dy * (zp[k] - mean) * inv_std;
      }
    }
    dgamma[c] += static_cast<T>(sum_dy_xhat);
    dbeta[c] += static_cast<T>(sum_dy);
    const T k0 = gamma[c] * inv_std;
    const T mean_dy = static_cast<T>(sum_dy / count);
    const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
    for (int i = 0; i < z.n(); ++i) {
      const T* zp = z.channel(i, c);
      T* out = dz.channel(i, c);
      for (std::size_t k = 0; k < hw; ++k) {
        const T xhat = (zp[k] - mean) * inv_std;
        out[k] = k0 * (out[k] - mean_dy - xhat * mean_dy_xhat);
      }
    }
  }
  return dz;
}

template <typename T>
Tensor<T> leaky_forward(Tensor<T> z, T slope) {
  for (T& v : z.values()) v = leaky(v, slope);
  return z;
}

/// In-place: da becomes dz using the sign of the forward output a.
template <typename T>
void leaky_backward(const Tensor<T>& a, Tensor<T>& da, T slope) {
  const T* ap = a.data();
  T* g = da.data();
  for (std::size_t k = 0; k < da.size(); ++k)
    if (!(ap[k] > T(0))) g[k] *= slope;
}

// --- 2x2 max pooling ----------------------------------------------------------

template <typename T>
Tensor<T> maxpool2x2_forward(const Tensor<T>& x, std::vector<std::int32_t>* argmax) {
  require(x.h() % 2 == 0 && x.w() % 2 == 0, "maxpool: spatial dimensions must be even");
  const int oh = x.h() / 2;
  const int ow = x.w() / 2;
  Tensor<T> y(x.n(), x.c(), oh, ow);
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t o = 0;
  for (int i = 0; i < x.n(); ++i) {
    for (int c = 0; c < x.c(); ++c) {
      const T* p = x.channel(i, c);
      T* q = y.channel(i, c);
      for (int yy = 0; yy < oh; ++yy) {
        for (int xx = 0; xx < ow; ++xx, ++o) {
          const int base = 2 * yy * x.w() + 2 * xx;
          int best = base;
          for (int idx : {base + 1, base + x.w(), base + x.w() + 1})
            if (p[idx] > p[best]) best = idx;
          q[yy * ow + xx] = p[best];
          if (argmax) (*argmax)[o] = best;
        }
      }
    }
  }
  return y;
}

template <typename T>
void maxpool2x2_backward(const Tensor<T>& dy, const std::vector<std::int32_t>& argmax,
                         Tensor<T>& dx) {
  std::size_t o = 0;
  for (int i = 0; i < dy.n(); ++i) {
    for (int c = 0; c < dy.c(); ++c) {
      const T* g = dy.channel(i, c);
      T* out = dx.channel(i, c);
      for (std::size_t k = 0; k < dy.plane(); ++k, ++o) out[argmax[o]] += g[k];
    }
  }
}

// --- 2x2 stride-2 transposed convolution --------------------------------------

/// weight: Cin x (Cout*4), entry [ci, co*4 + a*2 + b] maps input (i, j) to output (2i+a, 2j+b).
template <typename T>
Tensor<T> upconv2x2_forward(const Tensor<T>& x, const T* weight, const T* bias, int out_channels) {
  const int h = x.h();
  const int w = x.w();
  Tensor<T> y(x.n(), out_channels, 2 * h, 2 * w);
  ConstMatMap<T> wm(weight, x.c(), out_channels * 4);
  MatrixRM<T> z(out_channels * 4, static_cast<Eigen::Index>(x.plane()));
  for (int i = 0; i < x.n(); ++i) {
    z.noalias() = wm.transpose() * x.matrix(i);
    for (int co = 0; co < out_channels; ++co) {
      T* out = y.channel(i, co);
      for (int k = 0; k < 4; ++k) {
        const int a = k / 2;
        const int b = k % 2;
        const T* row = z.data() + static_cast<std::size_t>(co * 4 + k) * x.plane();
        for (int r = 0; r < h; ++r)
          for (int c = 0; c < w; ++c)
            out[(2 * r + a) * (2 * w) + 2 * c + b] = row[r * w + c] + bias[co];
      }
    }
  }
  return y;
}

template <typename T>
void upconv2x2_backward(const Tensor<T>& x, const T* weight, const Tensor<T>& dy, Tensor<T>* dx,
                        T* dweight, T* dbias) {
  const int h = x.h();
  const int w = x.w();
  const int cout = dy.c();
  ConstMatMap<T> wm(weight, x.c(), cout * 4);
  MatMap<T> dw(dweight, x.c(), cout * 4);
  MatrixRM<T> dz(cout * 4, static_cast<Eigen::Index>(x.plane()));
  if (dx) *dx = Tensor<T>(x.n(), x.c(), h, w);
  for (int i = 0; i < x.n(); ++i) {
    for (int co = 0; co < cout; ++co) {
      const T* g = dy.channel(i, co);
      double bsum = 0.0;
      for (int k = 0; k < 4; ++k) {
        const int a = k / 2;
        const int b = k % 2;
        T* row = dz.data() + static_cast<std::size_t>(co * 4 + k) * x.plane();
        for (int r = 0; r < h; ++r)
          for (int c = 0; c < w; ++c) {
            row[r * w + c] = g[(2 * r + a) * (2 * w) + 2 * c + b];
            bsum += row[r * w + c];
          }
      }
      dbias[co] += static_cast<T>(bsum);
    }
    dw.noalias() += x.matrix(i) * dz.transpose();
    if (dx) dx->matrix(i).noalias() = wm * dz;
  }
}

// --- channel concatenation ----------------------------------------------------

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(),
          "concat: spatial shapes differ (" + std::to_string(a.h()) + "x" + std::to_string(a.w()) +
              " vs " + std::to_string(b.h()) + "x" + std::to_string(b.w()) + ")");
  Tensor<T> out(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int i = 0; i < a.n(); ++i) {
    std::copy(a.sample(i), a.sample(i) + a.sample_size(), out.sample(i));
    std::copy(b.sample(i), b.sample(i) + b.sample_size(), out.sample(i) + a.sample_size());
  }
  return out;
}

template <typename T>
void split_channels(const Tensor<T>& d, int first_channels, Tensor<T>& da, Tensor<T>& db) {
  da = Tensor<T>(d.n(), first_channels, d.h(), d.w());
  db = Tensor<T>(d.n(), d.c() - first_channels, d.h(), d.w());
  for (int i = 0; i < d.n(); ++i) {
    std::copy(d.sample(i), d.sample(i) + da.sample_size(), da.sample(i));
    std::copy(d.sample(i) + da.sample_size(), d.sample(i) + d.sample_size(), db.sample(i));
  }
}

// --- output activations ------------------------------------------------------

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  Tensor<T> p(logits.n(), logits.c(), logits.h(), logits.w());
  const std::size_t hw = logits.plane();
  for (int i = 0; i < logits.n(); ++i) {
    for (std::size_t k = 0; k < hw; ++k) {
      T m = -std::numeric_limits<T>::infinity();
      for (int c = 0; c < logits.c(); ++c) m = std::max(m, logits.channel(i, c)[k]);
      T sum = 0;
      for (int c = 0; c < logits.c(); ++c) {
        const T e = std::exp(logits.channel(i, c)[k] - m);
        p.channel(i, c)[k] = e;
        sum += e;
      }
      for (int c = 0; c < logits.c(); ++c) p.channel(i, c)[k] /= sum;
    }
  }
  return p;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& logits) {
  Tensor<T> out = logits;
  for (T& v : out.values()) v = T(1) / (T(1) + std::exp(-v));
  return out;
}

}  // namespace suture::nn
