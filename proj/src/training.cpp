#include "suture/training.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <pmmintrin.h>
#include <xmmintrin.h>

#include "suture/error.hpp"
#include "suture/seed.hpp"

namespace suture {

void LossConfig::validate() const {
  require(w_seg >= 0.0 && w_depth >= 0.0, "loss: weights must be non-negative");
  require(w_seg + w_depth > 0.0, "loss: w_seg and w_depth cannot both be zero");
  for (double w : class_weights) require(w >= 0.0, "loss: class weights must be non-negative");
  require(class_weights[0] + class_weights[1] + class_weights[2] > 0.0,
          "loss: class weights cannot all be zero");
}

std::string to_string(TrainPhase phase) {
  return phase == TrainPhase::JointSynthetic ? "joint_synthetic" : "seg_finetune_real";
}

void OptimizerConfig::validate() const {
  require(learning_rate > 0.0, "training: learning_rate must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          "training: ADAM betas must lie in [0, 1)");
  require(epsilon > 0.0, "training: ADAM epsilon must be > 0");
  require(batch_size >= 1, "training: batch_size must be >= 1");
  require(epochs_synthetic >= 0 && epochs_real >= 0, "training: epoch counts must be >= 0");
  require(max_steps >= 0, "training: max_steps must be >= 0");
}

Batch make_batch(const std::vector<Sample>& samples, const nn::ModelConfig& config) {
  require(!samples.empty(), "training: empty batch");
  const int n = static_cast<int>(samples.size());
  const int h = config.input_height;
  const int w = config.input_width;
  bool all_depth = true;
  for (const Sample& s : samples) {
    require(s.rgb.rows == h && s.rgb.cols == w,
            "training: sample " + s.id + " is " + std::to_string(s.rgb.cols) + "x" +
                std::to_string(s.rgb.rows) + ", model expects " + std::to_string(w) + "x" +
                std::to_string(h));
    require(s.seg.rows == h && s.seg.cols == w, "training: seg size mismatch for " + s.id);
    all_depth = all_depth && s.has_depth();
  }
  Batch b;
  b.rgb = nn::Tensor<float>(n, 3, h, w);
  b.labels = nn::Tensor<std::uint8_t>(n, 1, h, w);
  if (all_depth) b.depth_norm = nn::Tensor<float>(n, 1, h, w);
  const float inv_scale = static_cast<float>(1.0 / config.depth_scale_mm);
  for (int i = 0; i < n; ++i) {
    const Sample& s = samples[i];
    for (int y = 0; y < h; ++y) {
      const auto* rgb = s.rgb.ptr<cv::Vec3b>(y);
      const auto* seg = s.seg.ptr<std::uint8_t>(y);
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) b.rgb(i, c, y, x) = rgb[x][c] / 255.0f;
        b.labels(i, 0, y, x) = seg[x];
      }
      if (all_depth) {
        const auto* d = s.depth.ptr<float>(y);
        for (int x = 0; x < w; ++x)
          b.depth_norm(i, 0, y, x) = std::clamp(d[x] * inv_scale, 0.0f, 1.0f);
      }
    }
  }
  return b;
}

namespace {

/// Flushes denormal floats to zero for the lifetime of the guard. Late in training many
/// activations and ADAM moments decay into the denormal range, which tripled step times.
class DenormalsAreZero {
 public:
  DenormalsAreZero() : saved_(_mm_getcsr()) {
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
  }
  ~DenormalsAreZero() { _mm_setcsr(saved_); }
  DenormalsAreZero(const DenormalsAreZero&) = delete;
  DenormalsAreZero& operator=(const DenormalsAreZero&) = delete;

 private:
  unsigned saved_;
};

Checkpoint run_phase(const std::vector<SampleRecord>& records, const Checkpoint& start,
                     const OptimizerConfig& opt, const LossConfig& loss, TrainPhase phase,
                     int epochs, const TrainCallbacks& callbacks) {
  const DenormalsAreZero ftz;
  const bool joint = phase == TrainPhase::JointSynthetic;
  Checkpoint ck = start;
  ck.meta.phase = to_string(phase);
  ck.meta.epochs = 0;
  ck.meta.steps = 0;
  ck.meta.final_loss.reset();
  ck.meta.seed = opt.seed;
  ck.meta.history.push_back(to_string(phase));
  if (epochs == 0 || (opt.max_steps == 0 && records.empty())) return ck;

  nn::UNet<float> net(ck.config);
  Adam<float> adam(ck.params, opt);
  const nn::Heads heads{true, joint};
  const std::uint64_t shuffle_base = derive_seed(opt.seed, "shuffle-" + to_string(phase));
  std::vector<std::size_t> order(records.size());
  std::int64_t step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (opt.max_steps > 0 && step >= opt.max_steps) break;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(shuffle_base, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    LossValue sum;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += opt.batch_size) {
      if (opt.max_steps > 0 && step >= opt.max_steps) break;
      const std::size_t end = std::min(order.size(), begin + opt.batch_size);
      std::vector<Sample> samples;
      for (std::size_t k = begin; k < end; ++k) samples.push_back(load_sample(records[order[k]]));
      const Batch batch = make_batch(samples, ck.config);
      if (joint)
        require(!batch.depth_norm.empty(), "training: joint phase batch lacks depth");

      ck.params.zero_grad();
      const nn::Trace<float> trace =
          net.forward_traced(batch.rgb, ck.params, nn::Mode::Train, heads, &ck.params);
      nn::Tensor<float> d_seg, d_depth;
      const LossValue value =
          loss_total(trace.prediction, batch.labels, joint ? &batch.depth_norm : nullptr, loss,
                     phase, &d_seg, joint ? &d_depth : nullptr);
      net.backward(trace, ck.params, &d_seg, joint ? &d_depth : nullptr);
      if (joint)
        adam.step(ck.params, {nn::Group::Encoder, nn::Group::SegDecoder, nn::Group::DepthDecoder});
      else
        adam.step(ck.params, {nn::Group::Encoder, nn::Group::SegDecoder});
      ++step;
      if (callbacks.on_step) callbacks.on_step(step, value);
      sum.total += value.total;
      sum.ce += value.ce;
      sum.mse += value.mse;
      ++batches;
    }
    if (batches == 0) break;
    EpochLog log{phase, epoch + 1, step, sum.total / batches, sum.ce / batches,
                 sum.mse / batches};
    ck.meta.epochs = epoch + 1;
    ck.meta.steps = step;
    ck.meta.final_loss = log.loss;
    if (callbacks.on_epoch) callbacks.on_epoch(log);
  }
  return ck;
}

}  // namespace

Checkpoint train_joint(const Manifest& corpus, const Checkpoint& init, const OptimizerConfig& opt,
                       const LossConfig& loss, const TrainCallbacks& callbacks) {
  opt.validate();
  loss.validate();
  const std::vector<SampleRecord> train = corpus.select(Split::Train);
  require(!train.empty(), "train: corpus has no train-split records");
  for (const SampleRecord& r : train)
    require(r.depth_path.has_value(),
            "train: record " + r.id + " has no depth map; the joint phase needs depth");
  return run_phase(train, init, opt, loss, TrainPhase::JointSynthetic, opt.epochs_synthetic,
                   callbacks);
}

Checkpoint finetune_seg(const Manifest& corpus, const Checkpoint& checkpoint,
                        const OptimizerConfig& opt, const LossConfig& loss,
                        const TrainCallbacks& callbacks, const FinetuneOptions& options) {
  opt.validate();
  loss.validate();
  const std::vector<SampleRecord> train = corpus.select(Split::Train);
  require(!train.empty(), "finetune: corpus has no train-split records");
  for (const SampleRecord& r : train) {
    require(!r.seg_path.empty(), "finetune: record " + r.id + " has no segmentation");
    if (options.reject_synthetic)
      require(r.provenance == Provenance::Real,
              "finetune: record " + r.id + " is synthetic but only real records are allowed");
  }
  Checkpoint out =
      run_phase(train, checkpoint, opt, loss, TrainPhase::SegFinetuneReal, opt.epochs_real,
                callbacks);
  // The depth decoder is never touched by the optimizer; assert it anyway.
  if (!parameters_equal(out.params.group(nn::Group::DepthDecoder),
                        checkpoint.params.group(nn::Group::DepthDecoder)))
    throw RuntimeFailure("finetune: depth decoder changed during fine-tuning");
  return out;
}

}  // namespace suture
