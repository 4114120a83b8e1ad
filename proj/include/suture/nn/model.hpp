#pragma once

// Shared-encoder U-Net with two decoders: a 3-class segmentation head (softmax)
// and a 1-channel normalized depth head (sigmoid).
//
// Encoder stage l (l = 0 .. depth_levels-1):
//   [conv3x3 -> batchnorm -> LeakyReLU] x 2  (skip)  -> maxpool 2x2
// Bottleneck: the same double block at 1/2^depth_levels resolution.
// Decoder stage l (per head, from the bottom up):
//   upconv 2x2/2 -> concat(skip l) -> [conv3x3 -> LeakyReLU] x 2
// Heads: 1x1 conv to 3 (seg) / 1 (depth) channels.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "suture/error.hpp"
#include "suture/nn/layers.hpp"
#include "suture/nn/tensor.hpp"

namespace suture::nn {

struct ModelConfig {
  int depth_levels = 4;
  int base_channels = 32;
  double leaky_slope = 0.01;
  int input_height = 512;
  int input_width = 512;
  int num_classes = 3;
  double depth_scale_mm = 300.0;  // depth_mm = depth_norm * depth_scale_mm

  int channels(int level) const { return base_channels << level; }

  void validate() const {
    require(depth_levels >= 1 && depth_levels <= 8, "model: depth_levels must lie in [1, 8]");
    require(base_channels >= 1, "model: base_channels must be positive");
    require(leaky_slope >= 0 && leaky_slope < 1, "model: leaky_slope must lie in [0, 1)");
    require(num_classes == 3, "model: num_classes must be 3");
    require(depth_scale_mm > 0, "model: depth_scale_mm must be positive");
    const int div = 1 << depth_levels;
    require(input_height > 0 && input_width > 0 && input_height % div == 0 &&
                input_width % div == 0,
            "model: input size " + std::to_string(input_height) + "x" +
                std::to_string(input_width) + " must be divisible by 2^depth_levels = " +
                std::to_string(div));
  }

  bool operator==(const ModelConfig&) const = default;
};

enum class Group : int { Encoder = 0, SegDecoder = 1, DepthDecoder = 2 };
inline constexpr std::array<Group, 3> kAllGroups{Group::Encoder, Group::SegDecoder,
                                                 Group::DepthDecoder};

inline const char* group_name(Group g) {
  switch (g) {
    case Group::Encoder: return "encoder";
    case Group::SegDecoder: return "seg_decoder";
    case Group::DepthDecoder: return "depth_decoder";
  }
  return "?";
}

template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  bool trainable = true;  // false for batch-norm running statistics
};

template <typename T>
struct ParameterGroup {
  std::vector<Parameter<T>> params;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].name == name) return i;
    throw ValidationError("unknown parameter '" + name + "'");
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
  }
};

/// Learned weights, partitioned into three disjoint groups.
template <typename T>
struct ModelParameters {
  std::array<ParameterGroup<T>, 3> groups;

  ParameterGroup<T>& group(Group g) { return groups[static_cast<int>(g)]; }
  const ParameterGroup<T>& group(Group g) const { return groups[static_cast<int>(g)]; }

  void zero_grad() {
    for (auto& g : groups)
      for (auto& p : g.params) std::fill(p.grad.begin(), p.grad.end(), T(0));
  }

  template <typename U>
  ModelParameters<U> cast() const {
    ModelParameters<U> out;
    for (int g = 0; g < 3; ++g) {
      for (const auto& p : groups[g].params) {
        Parameter<U> q;
        q.name = p.name;
        q.shape = p.shape;
        q.trainable = p.trainable;
        q.value.assign(p.value.begin(), p.value.end());
        q.grad.assign(p.value.size(), U(0));
        out.groups[g].params.push_back(std::move(q));
      }
    }
    return out;
  }
};

template <typename T>
struct Prediction {
  Tensor<T> seg_probs;   // N x 3 x H x W
  Tensor<T> depth_norm;  // N x 1 x H x W, in [0, 1]
};

enum class Mode { Train, Eval };

struct Heads {
  bool seg = true;
  bool depth = true;
};

/// Parameter names and shapes in canonical order; the same layout is used for
/// initialization, checkpoints and the network itself.
struct ParamSpec {
  Group group;
  std::string name;
  std::vector<int> shape;
  enum Kind { ConvWeight, UpWeight, HeadWeight, Bias, Gamma, Beta, RunningMean, RunningVar } kind;
  int fan_in = 1;
};

inline std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg) {
  std::vector<ParamSpec> out;
  auto double_block = [&](Group g, const std::string& prefix, int cin, int cout, bool bn) {
    for (int k = 1; k <= 2; ++k) {
      const int in = k == 1 ? cin : cout;
      const std::string conv = prefix + ".conv" + std::to_string(k);
      out.push_back({g, conv + ".weight", {cout, in, 3, 3}, ParamSpec::ConvWeight, in * 9});
      out.push_back({g, conv + ".bias", {cout}, ParamSpec::Bias});
      if (bn) {
        const std::string b = prefix + ".bn" + std::to_string(k);
        out.push_back({g, b + ".gamma", {cout}, ParamSpec::Gamma});
        out.push_back({g, b + ".beta", {cout}, ParamSpec::Beta});
        out.push_back({g, b + ".running_mean", {cout}, ParamSpec::RunningMean});
        out.push_back({g, b + ".running_var", {cout}, ParamSpec::RunningVar});
      }
    }
  };
  for (int l = 0; l < cfg.depth_levels; ++l)
    double_block(Group::Encoder, "enc" + std::to_string(l), l == 0 ? 3 : cfg.channels(l - 1),
                 cfg.channels(l), true);
  double_block(Group::Encoder, "bottleneck", cfg.channels(cfg.depth_levels - 1),
               cfg.channels(cfg.depth_levels), true);
  for (Group g : {Group::SegDecoder, Group::DepthDecoder}) {
    const std::string head = g == Group::SegDecoder ? "seg" : "depth";
    for (int l = cfg.depth_levels - 1; l >= 0; --l) {
      const std::string p = head + ".dec" + std::to_string(l);
      const int cin = cfg.channels(l + 1);
      const int cout = cfg.channels(l);
      out.push_back({g, p + ".up.weight", {cin, cout, 2, 2}, ParamSpec::UpWeight, cin});
      out.push_back({g, p + ".up.bias", {cout}, ParamSpec::Bias});
      double_block(g, p, 2 * cout, cout, false);
    }
    const int outc = g == Group::SegDecoder ? cfg.num_classes : 1;
    out.push_back({g, head + ".head.weight", {outc, cfg.base_channels, 1, 1}, ParamSpec::HeadWeight,
                   cfg.base_channels});
    out.push_back({g, head + ".head.bias", {outc}, ParamSpec::Bias});
  }
  return out;
}

/// Fan-in scaled Gaussian initialization (He for conv layers feeding LeakyReLU,
/// LeCun for the output heads); biases zero, batch-norm affine (1, 0), running (0, 1).
template <typename T>
ModelParameters<T> init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParameters<T> params;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const ParamSpec& s : parameter_layout(cfg)) {
    Parameter<T> p;
    p.name = s.name;
    p.shape = s.shape;
    std::size_t n = 1;
    for (int d : s.shape) n *= static_cast<std::size_t>(d);
    p.value.assign(n, T(0));
    p.grad.assign(n, T(0));
    switch (s.kind) {
      case ParamSpec::ConvWeight:
      case ParamSpec::UpWeight: {
        const double stddev = std::sqrt(2.0 / s.fan_in);
        for (T& v : p.value) v = static_cast<T>(stddev * normal(rng));
        break;
      }
      case ParamSpec::HeadWeight: {
        const double stddev = std::sqrt(1.0 / s.fan_in);
        for (T& v : p.value) v = static_cast<T>(stddev * normal(rng));
        break;
      }
      case ParamSpec::Gamma:
      case ParamSpec::RunningVar: std::fill(p.value.begin(), p.value.end(), T(1)); break;
      default: break;
    }
    p.trainable = s.kind != ParamSpec::RunningMean && s.kind != ParamSpec::RunningVar;
    params.group(s.group).params.push_back(std::move(p));
  }
  return params;
}

/// Intermediate activations retained for backpropagation.
template <typename T>
struct EncoderTrace {
  Tensor<T> z1, a1, z2, a2;  // a2 is the skip / pre-pooling activation
  BatchNormCache<T> bn1, bn2;
  Tensor<T> pooled;
  std::vector<std::int32_t> argmax;
};

template <typename T>
struct DecoderTrace {
  Tensor<T> concat, a1, a2;
};

template <typename T>
struct Trace {
  Tensor<T> input;
  std::vector<EncoderTrace<T>> encoder;
  EncoderTrace<T> bottleneck;
  std::vector<DecoderTrace<T>> seg;    // index = level
  std::vector<DecoderTrace<T>> depth;  // index = level
  Tensor<T> seg_logits, depth_logits;
  Prediction<T> prediction;
  Heads heads;
};

template <typename T>
class UNet {
 public:
  explicit UNet(ModelConfig config) : cfg_(std::move(config)) {
    cfg_.validate();
    std::array<std::size_t, 3> counters{0, 0, 0};
    for (const ParamSpec& s : parameter_layout(cfg_))
      index_[s.name] = Handle{s.group, counters[static_cast<int>(s.group)]++};
  }

  const ModelConfig& config() const { return cfg_; }

  /// Inference with running batch-norm statistics; pure.
  Prediction<T> forward(const Tensor<T>& rgb, const ModelParameters<T>& params) const {
    Trace<T> trace = run(rgb, params, Mode::Eval, Heads{}, nullptr);
    return std::move(trace.prediction);
  }

  /// Forward pass keeping activations. In Mode::Train batch statistics are used and the
  /// running buffers in `stats` (when non-null) are updated.
  Trace<T> forward_traced(const Tensor<T>& rgb, const ModelParameters<T>& params, Mode mode,
                          Heads heads = {}, ModelParameters<T>* stats = nullptr) const {
    return run(rgb, params, mode, heads, stats);
  }

  /// Accumulates parameter gradients given loss gradients w.r.t. the head logits.
  /// A null head gradient skips that decoder entirely (its parameters get no gradient).
  void backward(const Trace<T>& trace, ModelParameters<T>& params, const Tensor<T>* d_seg_logits,
                const Tensor<T>* d_depth_logits) const {
    const int levels = cfg_.depth_levels;
    const T slope = static_cast<T>(cfg_.leaky_slope);
    std::vector<Tensor<T>> d_skip(levels);
    Tensor<T> d_bottom;
    auto accumulate = [](Tensor<T>& into, const Tensor<T>& g) {
      if (into.empty()) {
        into = g;
        return;
      }
      T* a = into.data();
      const T* b = g.data();
      for (std::size_t k = 0; k < into.size(); ++k) a[k] += b[k];
    };

    auto decoder_backward = [&](const std::vector<DecoderTrace<T>>& dec, const std::string& head,
                                const Tensor<T>& d_logits) {
      Tensor<T> d;
      conv1x1_backward(dec[0].a2, value(params, head + ".head.weight"), d_logits, &d,
                       grad(params, head + ".head.weight"), grad(params, head + ".head.bias"));
      for (int l = 0; l < levels; ++l) {
        const std::string p = head + ".dec" + std::to_string(l);
        const DecoderTrace<T>& t = dec[l];
        leaky_backward(t.a2, d, slope);
        Tensor<T> d_a1;
        conv3x3_backward(t.a1, value(params, p + ".conv2.weight"), d, &d_a1,
                         grad(params, p + ".conv2.weight"), grad(params, p + ".conv2.bias"));
        leaky_backward(t.a1, d_a1, slope);
        Tensor<T> d_concat;
        conv3x3_backward(t.concat, value(params, p + ".conv1.weight"), d_a1, &d_concat,
                         grad(params, p + ".conv1.weight"), grad(params, p + ".conv1.bias"));
        Tensor<T> d_up;
        Tensor<T> d_s;
        split_channels(d_concat, cfg_.channels(l), d_up, d_s);
        accumulate(d_skip[l], d_s);
        const Tensor<T>& below = l + 1 < levels ? dec[l + 1].a2 : trace.bottleneck.a2;
        Tensor<T> d_below;
        upconv2x2_backward(below, value(params, p + ".up.weight"), d_up, &d_below,
                           grad(params, p + ".up.weight"), grad(params, p + ".up.bias"));
        if (l + 1 < levels)
          d = std::move(d_below);
        else
          accumulate(d_bottom, d_below);
      }
    };
    if (d_seg_logits) decoder_backward(trace.seg, "seg", *d_seg_logits);
    if (d_depth_logits) decoder_backward(trace.depth, "depth", *d_depth_logits);
    if (d_bottom.empty()) return;

    auto block_backward = [&](const EncoderTrace<T>& t, const Tensor<T>& input,
                              const std::string& p, Tensor<T>& d_a2, bool need_dx) {
      Tensor<T> dz2 = batchnorm_leaky_backward(t.z2, t.a2, d_a2, value(params, p + ".bn2.gamma"),
                                               t.bn2, slope, grad(params, p + ".bn2.gamma"),
                                               grad(params, p + ".bn2.beta"));
      Tensor<T> d_a1;
      conv3x3_backward(t.a1, value(params, p + ".conv2.weight"), dz2, &d_a1,
                       grad(params, p + ".conv2.weight"), grad(params, p + ".conv2.bias"));
      Tensor<T> dz1 = batchnorm_leaky_backward(t.z1, t.a1, d_a1, value(params, p + ".bn1.gamma"),
                                               t.bn1, slope, grad(params, p + ".bn1.gamma"),
                                               grad(params, p + ".bn1.beta"));
      Tensor<T> dx;
      conv3x3_backward(input, value(params, p + ".conv1.weight"), dz1, need_dx ? &dx : nullptr,
                       grad(params, p + ".conv1.weight"), grad(params, p + ".conv1.bias"));
      return dx;
    };

    Tensor<T> d = block_backward(trace.bottleneck, trace.encoder[levels - 1].pooled, "bottleneck",
                                 d_bottom, true);
    for (int l = levels - 1; l >= 0; --l) {
      const EncoderTrace<T>& t = trace.encoder[l];
      Tensor<T> d_a2(t.a2.n(), t.a2.c(), t.a2.h(), t.a2.w());
      maxpool2x2_backward(d, t.argmax, d_a2);
      if (!d_skip[l].empty()) {
        T* a = d_a2.data();
        const T* b = d_skip[l].data();
        for (std::size_t k = 0; k < d_a2.size(); ++k) a[k] += b[k];
      }
      const Tensor<T>& input = l == 0 ? trace.input : trace.encoder[l - 1].pooled;
      d = block_backward(t, input, "enc" + std::to_string(l), d_a2, l > 0);
    }
  }

  /// Stand-alone encoder stage for shape checks: returns (pooled output, skip).
  std::pair<Tensor<T>, Tensor<T>> encoder_stage(int level, const Tensor<T>& features,
                                                const ModelParameters<T>& params,
                                                Mode mode = Mode::Eval) const {
    require(features.h() % 2 == 0 && features.w() % 2 == 0,
            "encoder_stage: spatial dimensions must be even");
    EncoderTrace<T> t = encoder_block(features, params, "enc" + std::to_string(level),
                                      cfg_.channels(level), mode, nullptr, true);
    return {std::move(t.pooled), std::move(t.a2)};
  }

  /// Stand-alone decoder stage (upconv, skip concat, two conv + LeakyReLU).
  Tensor<T> decoder_stage(Group head, int level, const Tensor<T>& features, const Tensor<T>& skip,
                          const ModelParameters<T>& params) const {
    DecoderTrace<T> t = decoder_block(features, skip, params,
                                      (head == Group::SegDecoder ? "seg" : "depth") +
                                          std::string(".dec") + std::to_string(level),
                                      cfg_.channels(level));
    return std::move(t.a2);
  }

 private:
  struct Handle {
    Group group = Group::Encoder;
    std::size_t index = 0;
  };

  const T* value(const ModelParameters<T>& p, const std::string& name) const {
    const Handle& h = index_.at(name);
    return p.group(h.group).params[h.index].value.data();
  }
  T* grad(ModelParameters<T>& p, const std::string& name) const {
    const Handle& h = index_.at(name);
    return p.group(h.group).params[h.index].grad.data();
  }
  T* mutable_value(ModelParameters<T>& p, const std::string& name) const {
    const Handle& h = index_.at(name);
    return p.group(h.group).params[h.index].value.data();
  }

  EncoderTrace<T> encoder_block(const Tensor<T>& x, const ModelParameters<T>& params,
                                const std::string& p, int channels, Mode mode,
                                ModelParameters<T>* stats, bool pool) const {
    const T slope = static_cast<T>(cfg_.leaky_slope);
    const bool training = mode == Mode::Train;
    EncoderTrace<T> t;
    t.z1 = conv3x3_forward(x, value(params, p + ".conv1.weight"), value(params, p + ".conv1.bias"),
                           channels);
    t.a1 = batchnorm_leaky_forward(
        t.z1, value(params, p + ".bn1.gamma"), value(params, p + ".bn1.beta"),
        value(params, p + ".bn1.running_mean"), value(params, p + ".bn1.running_var"), training,
        slope, &t.bn1, stats ? mutable_value(*stats, p + ".bn1.running_mean") : nullptr,
        stats ? mutable_value(*stats, p + ".bn1.running_var") : nullptr);
    t.z2 = conv3x3_forward(t.a1, value(params, p + ".conv2.weight"),
                           value(params, p + ".conv2.bias"), channels);
    t.a2 = batchnorm_leaky_forward(
        t.z2, value(params, p + ".bn2.gamma"), value(params, p + ".bn2.beta"),
        value(params, p + ".bn2.running_mean"), value(params, p + ".bn2.running_var"), training,
        slope, &t.bn2, stats ? mutable_value(*stats, p + ".bn2.running_mean") : nullptr,
        stats ? mutable_value(*stats, p + ".bn2.running_var") : nullptr);
    if (pool) t.pooled = maxpool2x2_forward(t.a2, &t.argmax);
    return t;
  }

  DecoderTrace<T> decoder_block(const Tensor<T>& below, const Tensor<T>& skip,
                                const ModelParameters<T>& params, const std::string& p,
                                int channels) const {
    const T slope = static_cast<T>(cfg_.leaky_slope);
    Tensor<T> up = upconv2x2_forward(below, value(params, p + ".up.weight"),
                                     value(params, p + ".up.bias"), channels);
    require(up.h() == skip.h() && up.w() == skip.w(),
            "decoder_stage: skip is " + std::to_string(skip.h()) + "x" + std::to_string(skip.w()) +
                " but upsampled features are " + std::to_string(up.h()) + "x" +
                std::to_string(up.w()));
    DecoderTrace<T> t;
    t.concat = concat_channels(up, skip);
    up.release();
    t.a1 = leaky_forward(conv3x3_forward(t.concat, value(params, p + ".conv1.weight"),
                                         value(params, p + ".conv1.bias"), channels),
                         slope);
    t.a2 = leaky_forward(conv3x3_forward(t.a1, value(params, p + ".conv2.weight"),
                                         value(params, p + ".conv2.bias"), channels),
                         slope);
    return t;
  }

  Trace<T> run(const Tensor<T>& rgb, const ModelParameters<T>& params, Mode mode, Heads heads,
               ModelParameters<T>* stats) const {
    require(rgb.c() == 3 && rgb.h() == cfg_.input_height && rgb.w() == cfg_.input_width,
            "forward: expected N x 3 x " + std::to_string(cfg_.input_height) + " x " +
                std::to_string(cfg_.input_width) + " input, got N x " + std::to_string(rgb.c()) +
                " x " + std::to_string(rgb.h()) + " x " + std::to_string(rgb.w()));
    const int levels = cfg_.depth_levels;
    Trace<T> t;
    t.heads = heads;
    t.input = rgb;
    for (int l = 0; l < levels; ++l) {
      const Tensor<T>& x = l == 0 ? t.input : t.encoder[l - 1].pooled;
      t.encoder.push_back(
          encoder_block(x, params, "enc" + std::to_string(l), cfg_.channels(l), mode, stats, true));
    }
    t.bottleneck = encoder_block(t.encoder[levels - 1].pooled, params, "bottleneck",
                                 cfg_.channels(levels), mode, stats, false);

    auto decode = [&](const std::string& head, std::vector<DecoderTrace<T>>& dec) {
      dec.resize(levels);
      for (int l = levels - 1; l >= 0; --l) {
        const Tensor<T>& below = l + 1 < levels ? dec[l + 1].a2 : t.bottleneck.a2;
        dec[l] = decoder_block(below, t.encoder[l].a2, params,
                               head + ".dec" + std::to_string(l), cfg_.channels(l));
      }
    };
    if (heads.seg) {
      decode("seg", t.seg);
      t.seg_logits = conv1x1_forward(t.seg[0].a2, value(params, "seg.head.weight"),
                                     value(params, "seg.head.bias"), cfg_.num_classes);
      t.prediction.seg_probs = softmax_channels(t.seg_logits);
    }
    if (heads.depth) {
      decode("depth", t.depth);
      t.depth_logits = conv1x1_forward(t.depth[0].a2, value(params, "depth.head.weight"),
                                       value(params, "depth.head.bias"), 1);
      t.prediction.depth_norm = sigmoid(t.depth_logits);
    }
    return t;
  }

  ModelConfig cfg_;
  std::unordered_map<std::string, Handle> index_;
};

}  // namespace suture::nn
