#pragma once

// Losses, ADAM and the two training phases: joint synthetic training of both
// decoders, then fine-tuning of encoder + segmentation decoder on real frames.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "suture/checkpoint.hpp"
#include "suture/dataset.hpp"
#include "suture/manifest.hpp"
#include "suture/nn/model.hpp"

namespace suture {

struct LossConfig {
  double w_seg = 1.0;
  double w_depth = 1.0;
  std::array<double, 3> class_weights{1.0, 1.0, 1.0};

  void validate() const;
};

enum class TrainPhase { JointSynthetic, SegFinetuneReal };
std::string to_string(TrainPhase phase);

struct LossValue {
  double total = 0.0;
  double ce = 0.0;
  double mse = 0.0;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Pixel-averaged weighted cross-entropy (probabilities clamped at kProbabilityClamp)
/// plus pixel-averaged MSE on normalized depth. The MSE term is present iff
/// phase == JointSynthetic. When d_seg_logits / d_depth_logits are non-null they receive
/// the gradient of the total w.r.t. the head logits (softmax / sigmoid inputs).
template <typename T>
LossValue loss_total(const nn::Prediction<T>& pred, const nn::Tensor<std::uint8_t>& labels,
                     const nn::Tensor<T>* gt_depth_norm, const LossConfig& cfg, TrainPhase phase,
                     nn::Tensor<T>* d_seg_logits = nullptr,
                     nn::Tensor<T>* d_depth_logits = nullptr) {
  const auto& p = pred.seg_probs;
  require(p.c() == 3, "loss: segmentation prediction must have 3 channels");
  require(labels.n() == p.n() && labels.c() == 1 && labels.h() == p.h() && labels.w() == p.w(),
          "loss: label shape does not match the prediction");
  const bool joint = phase == TrainPhase::JointSynthetic;
  if (joint) {
    require(gt_depth_norm != nullptr, "loss: ground-truth depth is required in the joint phase");
    require(pred.depth_norm.same_shape(*gt_depth_norm) && gt_depth_norm->n() == p.n() &&
                gt_depth_norm->h() == p.h() && gt_depth_norm->w() == p.w(),
            "loss: depth shape does not match the prediction");
  }
  const std::size_t hw = p.plane();
  const double count = static_cast<double>(p.n()) * hw;
  LossValue out;
  if (d_seg_logits) *d_seg_logits = nn::Tensor<T>(p.n(), 3, p.h(), p.w());
  double ce = 0.0;
  for (int i = 0; i < p.n(); ++i) {
    const std::uint8_t* lab = labels.channel(i, 0);
    for (std::size_t k = 0; k < hw; ++k) {
      const int y = lab[k];
      require(y < 3, "loss: label outside {0,1,2}");
      const double w = cfg.class_weights[y];
      const double py = p.channel(i, y)[k];
      ce -= w * std::log(std::max(py, kProbabilityClamp));
      if (d_seg_logits) {
        const double scale = cfg.w_seg * w / count;
        for (int c = 0; c < 3; ++c)
          d_seg_logits->channel(i, c)[k] =
              static_cast<T>(scale * (p.channel(i, c)[k] - (c == y ? 1.0 : 0.0)));
      }
    }
  }
  out.ce = ce / count;
  out.total = cfg.w_seg * out.ce;
  if (joint) {
    const auto& d = pred.depth_norm;
    if (d_depth_logits) *d_depth_logits = nn::Tensor<T>(d.n(), 1, d.h(), d.w());
    double se = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
      const double pd = d.data()[k];
      const double diff = pd - gt_depth_norm->data()[k];
      se += diff * diff;
      if (d_depth_logits)
        d_depth_logits->data()[k] =
            static_cast<T>(cfg.w_depth * 2.0 * diff / count * pd * (1.0 - pd));
    }
    out.mse = se / count;
    out.total += cfg.w_depth * out.mse;
  }
  return out;
}

struct OptimizerConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 4;
  int epochs_synthetic = 20;
  int epochs_real = 10;
  std::int64_t max_steps = 0;  // 0: no cap
  std::uint64_t seed = 0;

  void validate() const;
};

/// ADAM over the trainable parameters of the selected groups.
template <typename T>
class Adam {
 public:
  Adam(const nn::ModelParameters<T>& params, const OptimizerConfig& cfg) : cfg_(cfg) {
    for (int g = 0; g < 3; ++g)
      for (const auto& p : params.groups[g].params) {
        m_[g].emplace_back(p.value.size(), T(0));
        v_[g].emplace_back(p.value.size(), T(0));
      }
  }

  void step(nn::ModelParameters<T>& params, std::initializer_list<nn::Group> groups) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.learning_rate);
    const T eps = static_cast<T>(cfg_.epsilon);
    const T inv_c1 = static_cast<T>(1.0 / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    for (nn::Group group : groups) {
      const int g = static_cast<int>(group);
      auto& ps = params.groups[g].params;
      for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!ps[i].trainable) continue;
        T* w = ps[i].value.data();
        const T* grad = ps[i].grad.data();
        T* m = m_[g][i].data();
        T* v = v_[g][i].data();
        for (std::size_t k = 0; k < ps[i].value.size(); ++k) {
          m[k] = b1 * m[k] + (T(1) - b1) * grad[k];
          v[k] = b2 * v[k] + (T(1) - b2) * grad[k] * grad[k];
          w[k] -= lr * (m[k] * inv_c1) / (std::sqrt(v[k] * inv_c2) + eps);
        }
      }
    }
  }

  std::int64_t steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::array<std::vector<std::vector<T>>, 3> m_;
  std::array<std::vector<std::vector<T>>, 3> v_;
  std::int64_t t_ = 0;
};

/// Network-ready batch: RGB scaled to [0, 1], class ids, depth / depth_scale_mm clamped to [0, 1].
struct Batch {
  nn::Tensor<float> rgb;
  nn::Tensor<std::uint8_t> labels;
  nn::Tensor<float> depth_norm;  // empty unless every sample has depth
};

Batch make_batch(const std::vector<Sample>& samples, const nn::ModelConfig& config);

struct EpochLog {
  TrainPhase phase;
  int epoch = 0;
  std::int64_t steps = 0;
  double loss = 0.0;
  double ce = 0.0;
  double mse = 0.0;
};

struct TrainCallbacks {
  std::function<void(const EpochLog&)> on_epoch;
  std::function<void(std::int64_t step, const LossValue&)> on_step;
};

/// Joint phase: all three groups trainable, loss = w_seg * CE + w_depth * MSE.
/// Uses the train split of `corpus`; every record needs depth.
Checkpoint train_joint(const Manifest& corpus, const Checkpoint& init, const OptimizerConfig& opt,
                       const LossConfig& loss, const TrainCallbacks& callbacks = {});

struct FinetuneOptions {
  bool reject_synthetic = false;
};

/// Fine-tuning phase: encoder + segmentation decoder trainable, depth decoder frozen,
/// loss = w_seg * CE. Uses the train split of `corpus`.
Checkpoint finetune_seg(const Manifest& corpus, const Checkpoint& checkpoint,
                        const OptimizerConfig& opt, const LossConfig& loss,
                        const TrainCallbacks& callbacks = {}, const FinetuneOptions& options = {});

}  // namespace suture
