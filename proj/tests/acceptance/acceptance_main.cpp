// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "suture/checkpoint.hpp"
#include "suture/config.hpp"
#include "suture/dataset.hpp"
#include "suture/eval.hpp"
#include "suture/geometry.hpp"
#include "suture/image_io.hpp"
#include "suture/nn/model.hpp"
#include "suture/pipeline.hpp"
#include "suture/scenegen.hpp"
#include "suture/seed.hpp"
#include "suture/training.hpp"
#include "test_support.hpp"

using namespace suture;
using suture::testing::TempDir;
using Eigen::Vector3d;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double axis_angle_deg(const Vector3d& a, const Vector3d& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return rad2deg(std::acos(std::clamp(c, 0.0, 1.0)));
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0,
                double e = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

// --------------------------------------------------------------------------
// 1. Renderer consistency

Outcome renderer_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  SceneGenConfig sg;
  long hits = 0, on_surface = 0, class_ok = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const ScenePose pose =
        build_scene(sg.specs, sg.camera, sg.randomization, derive_seed(std::uint64_t{1}, i));
    const RenderSample s = render(pose, sg.camera, sg.specs, sg.randomization, sg.render);
    const SceneSdf sdf(pose, sg.specs);
    for (int v = 0; v < sg.camera.height; ++v)
      for (int u = 0; u < sg.camera.width; ++u) {
        const float z = s.depth.at<float>(v, u);
        if (z <= 0.0f) continue;
        ++hits;
        const SceneSdf::Nearest n = sdf.nearest(sg.camera.backproject(u, v, z));
        on_surface += std::abs(n.distance) <= 2 * sg.render.march_tolerance;
        class_ok += seg_class_of(n.object) == s.seg.at<std::uint8_t>(v, u);
      }
  }
  const double secs = seconds_since(t0);
  const double surface_frac = double(on_surface) / std::max(hits, 1L);
  const double class_frac = double(class_ok) / std::max(hits, 1L);
  return {hits > 0 && surface_frac >= 0.999 && class_frac >= 0.999 && secs < 120.0,
          fmt("%.0f hit pixels, |sdf| ok %.5f, class ok %.5f, %.1f s", double(hits),
              surface_frac, class_frac, secs)};
}

// --------------------------------------------------------------------------
// 2. Metric oracles

double dice_oracle(const cv::Mat& a, const cv::Mat& b) {
  long inter = 0, sa = 0, sb = 0;
  for (int y = 0; y < a.rows; ++y)
    for (int x = 0; x < a.cols; ++x) {
      const bool pa = a.at<std::uint8_t>(y, x) != 0, pb = b.at<std::uint8_t>(y, x) != 0;
      inter += pa && pb;
      sa += pa;
      sb += pb;
    }
  if (sa + sb == 0) return 1.0;
  return 2.0 * inter / double(sa + sb);
}

double mae_oracle(const cv::Mat& pred, const cv::Mat& gt, const cv::Mat& valid) {
  double sum = 0;
  long n = 0;
  for (int y = 0; y < gt.rows; ++y)
    for (int x = 0; x < gt.cols; ++x)
      if (valid.at<std::uint8_t>(y, x)) {
        sum += std::abs(double(pred.at<float>(y, x)) - gt.at<float>(y, x));
        ++n;
      }
  return sum / n;
}

Outcome metric_oracles() {
  std::mt19937_64 rng(2024);
  int dice_bad = 0, mae_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 8 + int(rng() % 40), w = 8 + int(rng() % 40);
    cv::Mat a(h, w, CV_8U), b(h, w, CV_8U), pd(h, w, CV_32F), gd(h, w, CV_32F);
    cv::Mat valid(h, w, CV_8U);
    std::uniform_real_distribution<double> unit(0, 1);
    const double pa = unit(rng), pb = unit(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        a.at<std::uint8_t>(y, x) = unit(rng) < pa;
        b.at<std::uint8_t>(y, x) = unit(rng) < pb;
        pd.at<float>(y, x) = float(300 * unit(rng));
        gd.at<float>(y, x) = float(300 * unit(rng));
        valid.at<std::uint8_t>(y, x) = unit(rng) < 0.7;
      }
    valid.at<std::uint8_t>(0, 0) = 1;
    dice_bad += dice(a, b) != dice_oracle(a, b);
    mae_bad += mae_depth(pd, gd, valid) != mae_oracle(pd, gd, valid);
  }
  // Two 2x2 blocks overlapping in one column of a 2x3 strip.
  cv::Mat l = (cv::Mat_<std::uint8_t>(2, 3) << 1, 1, 0, 1, 1, 0);
  cv::Mat r = (cv::Mat_<std::uint8_t>(2, 3) << 0, 1, 1, 0, 1, 1);
  const double block = dice(l, r);
  // |10-13| + |20-17| + |30-31| = 7 over 3 pixels.
  cv::Mat p = (cv::Mat_<float>(1, 3) << 10, 20, 30);
  cv::Mat g = (cv::Mat_<float>(1, 3) << 13, 17, 31);
  const double mae = mae_depth(p, g, cv::Mat::ones(1, 3, CV_8U));
  return {dice_bad == 0 && mae_bad == 0 && std::abs(block - 0.5) < 1e-15 &&
              std::abs(mae - 7.0 / 3.0) < 1e-12,
          fmt("100 pairs: dice mismatches %.0f, mae mismatches %.0f; block dice %.3f, "
              "mae example %.6f",
              dice_bad, mae_bad, block, mae)};
}

// --------------------------------------------------------------------------
// 3. Network contracts

template <typename T>
nn::Tensor<T> random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
  nn::Tensor<T> t(n, c, h, w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  for (T& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

nn::Tensor<std::uint8_t> random_labels(int n, int h, int w, std::uint64_t seed) {
  nn::Tensor<std::uint8_t> t(n, 1, h, w);
  std::mt19937_64 rng(seed);
  for (auto& v : t.values()) v = static_cast<std::uint8_t>(rng() % 3);
  return t;
}

Outcome network_contracts() {
  nn::ModelConfig cfg;
  cfg.depth_levels = 3;
  cfg.base_channels = 8;
  cfg.input_height = 64;
  cfg.input_width = 96;

  // Shapes and head ranges.
  const nn::UNet<float> net(cfg);
  auto params = nn::init_parameters<float>(cfg, 3);
  const nn::Tensor<float> x = random_tensor<float>(2, 3, 64, 96, 4);
  const nn::Prediction<float> p = net.forward(x, params);
  bool shapes = p.seg_probs.n() == 2 && p.seg_probs.c() == 3 && p.seg_probs.h() == 64 &&
                p.seg_probs.w() == 96 && p.depth_norm.c() == 1 && p.depth_norm.h() == 64 &&
                p.depth_norm.w() == 96;
  double worst_sum = 0;
  for (int i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < p.seg_probs.plane(); ++k) {
      const double s = double(p.seg_probs.channel(i, 0)[k]) + p.seg_probs.channel(i, 1)[k] +
                       p.seg_probs.channel(i, 2)[k];
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }

  // Every trainable encoder tensor receives gradient under the joint loss.
  const nn::Tensor<std::uint8_t> labels = random_labels(2, 64, 96, 5);
  const nn::Tensor<float> depth = random_tensor<float>(2, 1, 64, 96, 6);
  params.zero_grad();
  {
    const nn::Trace<float> tr = net.forward_traced(x, params, nn::Mode::Train);
    nn::Tensor<float> ds, dd;
    loss_total(tr.prediction, labels, &depth, LossConfig{}, TrainPhase::JointSynthetic, &ds,
               &dd);
    net.backward(tr, params, &ds, &dd);
  }
  int zero_grad = 0;
  for (const auto& q : params.group(nn::Group::Encoder).params) {
    if (!q.trainable) continue;
    double norm = 0;
    for (float g : q.grad) norm += double(g) * g;
    zero_grad += norm <= 0.0;
  }

  // Central differences on 10 weights of a float64 copy.
  nn::ModelConfig small = cfg;
  small.input_height = 16;
  small.input_width = 16;
  small.depth_levels = 2;
  small.base_channels = 4;
  const nn::UNet<double> dnet(small);
  auto dp = nn::init_parameters<float>(small, 8).cast<double>();
  const nn::Tensor<double> dx = random_tensor<double>(2, 3, 16, 16, 9);
  const nn::Tensor<std::uint8_t> dl = random_labels(2, 16, 16, 10);
  const nn::Tensor<double> dd = random_tensor<double>(2, 1, 16, 16, 11);
  auto loss_of = [&]() {
    const nn::Trace<double> tr = dnet.forward_traced(dx, dp, nn::Mode::Train);
    return loss_total(tr.prediction, dl, &dd, LossConfig{}, TrainPhase::JointSynthetic).total;
  };
  dp.zero_grad();
  {
    const nn::Trace<double> tr = dnet.forward_traced(dx, dp, nn::Mode::Train);
    nn::Tensor<double> gs, gd;
    loss_total(tr.prediction, dl, &dd, LossConfig{}, TrainPhase::JointSynthetic, &gs, &gd);
    dnet.backward(tr, dp, &gs, &gd);
  }
  std::vector<std::pair<int, std::size_t>> weights;
  for (int g = 0; g < 3; ++g)
    for (std::size_t i = 0; i < dp.groups[g].params.size(); ++i)
      if (dp.groups[g].params[i].name.ends_with(".weight")) weights.emplace_back(g, i);
  std::mt19937_64 rng(99);
  double worst_rel = 0;
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    const auto [g, i] = weights[rng() % weights.size()];
    auto& q = dp.groups[g].params[i];
    const std::size_t k = rng() % q.value.size();
    const double saved = q.value[k];
    q.value[k] = saved + h;
    const double up = loss_of();
    q.value[k] = saved - h;
    const double down = loss_of();
    q.value[k] = saved;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(q.grad[k] - numeric) /
                       std::max({std::abs(double(q.grad[k])), std::abs(numeric), 1e-7});
    worst_rel = std::max(worst_rel, rel);
  }
  return {shapes && worst_sum <= 1e-5 && zero_grad == 0 && worst_rel <= 1e-3,
          std::string(shapes ? "shapes match" : "SHAPE MISMATCH") +
              fmt(", max |sum-1| %.2e, encoder tensors without gradient %.0f, "
                  "worst fd rel err %.2e",
                  worst_sum, zero_grad, worst_rel)};
}

// --------------------------------------------------------------------------
// 4. Overfit smoke test

Outcome overfit_smoke(const std::filesystem::path& root) {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineConfig c = load_config(std::filesystem::path(SUTURE_SOURCE_DIR) / "configs/smoke.yaml");
  c.scene.test_fraction = 0.0;
  c.augmentation.crops_per_image = 1;
  const Manifest synthetic = generate_dataset(16, c.scene, root / "synthetic");
  const Manifest corpus =
      build_training_corpus(synthetic, std::nullopt, c.augmentation, root / "prepared");
  const Checkpoint init = Checkpoint::initialize(c.model, c.stage_seed("init"));
  const Checkpoint trained = train_joint(corpus, init, c.optimizer, c.loss);
  // Score on the very frames it was trained on.
  Manifest seen = corpus;
  for (auto& r : seen.records) r.split = Split::Test;
  const CorpusMetrics m = evaluate(trained, seen, Provenance::Synthetic, c.eval);
  const double secs = seconds_since(t0);
  const double mae = m.mae_depth_mm.value_or(1e9);
  return {trained.meta.steps <= 500 && m.dice_needle >= 0.5 && m.dice_instruments >= 0.8 &&
              mae <= 10.0 && secs <= 7200.0,
          fmt("%.0f steps, needle dice %.3f, instrument dice %.3f, mae %.2f mm, %.0f s",
              double(trained.meta.steps), m.dice_needle, m.dice_instruments, mae, secs)};
}

// --------------------------------------------------------------------------
// 5. Fine-tune freeze

Outcome finetune_freeze(const std::filesystem::path& root) {
  // Rendered frames stand in for real ones: only RGB and segmentation are kept.
  SceneGenConfig sg;
  sg.camera = suture::testing::small_camera(96, 64, 120.0);
  const auto raw = root / "real_raw";
  std::filesystem::create_directories(raw);
  for (std::uint64_t i = 0; i < 8; ++i) {
    const ScenePose pose =
        build_scene(sg.specs, sg.camera, sg.randomization, derive_seed(std::uint64_t{5}, i));
    const RenderSample s = render(pose, sg.camera, sg.specs, sg.randomization, sg.render);
    write_rgb_png(raw / ("f" + std::to_string(i) + "_rgb.png"), s.rgb);
    write_seg_png(raw / ("f" + std::to_string(i) + "_seg.png"), s.seg);
  }
  AugmentationConfig aug;
  aug.target_height = 64;
  aug.crop_width = 64;
  aug.crops_per_image = 2;
  aug.seed = 3;
  const Manifest corpus = build_training_corpus(
      {}, ingest_real_directory(raw, 0.0, 1), aug, root / "real_prepared");
  nn::ModelConfig mc;
  mc.input_height = 64;
  mc.input_width = 64;
  mc.depth_levels = 3;
  mc.base_channels = 8;
  const Checkpoint joint = Checkpoint::initialize(mc, 12);
  OptimizerConfig opt;
  opt.learning_rate = 1e-3;
  opt.epochs_real = 2;
  FinetuneOptions options;
  options.reject_synthetic = true;
  const Checkpoint tuned = finetune_seg(corpus, joint, opt, LossConfig{}, {}, options);
  const bool depth_same = parameters_equal(tuned.params.group(nn::Group::DepthDecoder),
                                           joint.params.group(nn::Group::DepthDecoder));
  const double enc = max_abs_diff(tuned.params.group(nn::Group::Encoder),
                                  joint.params.group(nn::Group::Encoder));
  const double seg = max_abs_diff(tuned.params.group(nn::Group::SegDecoder),
                                  joint.params.group(nn::Group::SegDecoder));
  return {depth_same && enc > 0 && seg > 0,
          std::string("depth decoder ") + (depth_same ? "bit-identical" : "CHANGED") +
              fmt(", encoder max change %.3e, seg decoder max change %.3e", enc, seg)};
}

// --------------------------------------------------------------------------
// 6. Geometry recovery from ground truth

Outcome geometry_recovery() {
  SceneGenConfig sg;
  sg.randomization.noise_sigma = 0.0;
  double center = 0, radius = 0, normal = 0, fraction = 0;
  int missing = 0, grasped = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const ScenePose pose =
        build_scene(sg.specs, sg.camera, sg.randomization, derive_seed(std::uint64_t{99}, i));
    const RenderSample rs = render(pose, sg.camera, sg.specs, sg.randomization, sg.render);
    // Depth goes through the same 0.1 mm quantization as the stored PNGs.
    const FrameGeometry g = analyze_frame(quantize_depth(rs.depth), rs.seg, sg.camera);
    if (!g.circle) {
      ++missing;
      continue;
    }
    const RigidTransform needle = pose.camera.inverse() * pose.needle;
    center = std::max(center, (g.circle->center - needle.translation).norm());
    radius = std::max(radius, std::abs(g.circle->radius - sg.specs.needle.circle_radius));
    normal = std::max(normal, axis_angle_deg(g.circle->normal, needle.rotate(Vector3d::UnitZ())));
    if (pose.grasped) {
      ++grasped;
      if (!g.metrics) {
        ++missing;
        continue;
      }
      fraction = std::max(fraction, std::abs(g.metrics->grasp_fraction - pose.grasp_fraction));
    }
  }
  return {missing == 0 && center < 0.5 && radius < 0.2 && normal < 1.0 && fraction < 0.05,
          fmt("worst over 20 frames: center %.3f mm, radius %.3f mm, normal %.3f deg, "
              "grasp fraction %.3f (%.0f grasped)",
              center, radius, normal, fraction, grasped) +
              (missing ? " missing fits: " + std::to_string(missing) : "")};
}

// --------------------------------------------------------------------------
// 7. Circle fit under noise

Outcome noise_robustness() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_real_distribution<double> unit(-1, 1);
  std::vector<double> errors;
  for (int trial = 0; trial < 100; ++trial) {
    const Vector3d c(20 * unit(rng), 20 * unit(rng), 150 + 20 * unit(rng));
    const Vector3d n = Vector3d(unit(rng), unit(rng), unit(rng)).normalized();
    const Vector3d u = n.unitOrthogonal();
    const Vector3d v = n.cross(u);
    const double r = 8.0, a0 = kPi * unit(rng);
    std::vector<Vector3d> pts;
    for (int k = 0; k < 200; ++k) {
      const double a = a0 + kPi * k / 199.0;
      pts.push_back(c + r * (std::cos(a) * u + std::sin(a) * v) +
                    Vector3d(noise(rng), noise(rng), noise(rng)));
    }
    errors.push_back((fit_circle_3d(pts).center - c).norm());
  }
  std::nth_element(errors.begin(), errors.begin() + 50, errors.end());
  const double hi = errors[50];
  const double lo = *std::max_element(errors.begin(), errors.begin() + 50);
  const double median = 0.5 * (lo + hi);
  return {median < 0.5, fmt("median center error %.3f mm over 100 half-circle trials", median)};
}

// --------------------------------------------------------------------------
// 8. Determinism

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : bytes) h = (h ^ ch) * 1099511628211ull;
  return h;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t full_run(const std::filesystem::path& out) {
  const PipelineConfig c = parse_config(
      "", "<determinism>",
      {"output=" + out.string(), "seed=21", "scene.count=32", "scene.test_fraction=0.25",
       "scene.camera.width=160", "scene.camera.height=120", "scene.camera.fx=200",
       "scene.camera.fy=200", "scene.camera.cx=79.5", "scene.camera.cy=59.5",
       "dataset.target_height=64", "dataset.crop_width=64", "dataset.crops_per_image=2",
       "model.depth_levels=3", "model.base_channels=8", "training.learning_rate=1e-3",
       "training.epochs_synthetic=2"});
  std::ostringstream log;
  for (const char* stage : {"gen", "prepare", "train", "eval"}) run_stage(stage, c, log);
  return fnv1a(slurp(out / "eval/report.json"));
}

Outcome determinism(const std::filesystem::path& root) {
  const std::uint64_t a = full_run(root / "run_a");
  const std::uint64_t b = full_run(root / "run_b");
  char buf[96];
  std::snprintf(buf, sizeof buf, "report hashes %016llx / %016llx", (unsigned long long)a,
                (unsigned long long)b);
  return {a == b, buf};
}

}  // namespace

int main() {
  TempDir work("acceptance");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 renderer consistency", renderer_consistency},
      {"2 metric oracles", metric_oracles},
      {"3 network contracts", network_contracts},
      {"4 overfit smoke test", [&] { return overfit_smoke(work / "overfit"); }},
      {"5 fine-tune freeze", [&] { return finetune_freeze(work / "freeze"); }},
      {"6 geometry recovery", geometry_recovery},
      {"7 noise robustness", noise_robustness},
      {"8 determinism", [&] { return determinism(work / "determinism"); }},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
