#include "suture/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "suture/error.hpp"
#include "suture/scenegen.hpp"

namespace suture {

namespace {

void require_same_shape(const cv::Mat& a, const cv::Mat& b, const std::string& what) {
  require(a.rows == b.rows && a.cols == b.cols,
          what + ": shape mismatch (" + std::to_string(a.cols) + "x" + std::to_string(a.rows) +
              " vs " + std::to_string(b.cols) + "x" + std::to_string(b.rows) + ")");
}

struct Overlap {
  std::int64_t intersection = 0;
  std::int64_t total = 0;  // |A| + |B|
};

Overlap overlap(const cv::Mat& pred, const cv::Mat& gt, int cls) {
  Overlap o;
  for (int y = 0; y < gt.rows; ++y) {
    const auto* p = pred.ptr<std::uint8_t>(y);
    const auto* g = gt.ptr<std::uint8_t>(y);
    for (int x = 0; x < gt.cols; ++x) {
      const bool a = p[x] == cls;
      const bool b = g[x] == cls;
      o.intersection += a && b;
      o.total += int(a) + int(b);
    }
  }
  return o;
}

double ratio(const Overlap& o) {
  return o.total == 0 ? 1.0 : 2.0 * static_cast<double>(o.intersection) / o.total;
}

}  // namespace

double dice(const cv::Mat& pred_mask, const cv::Mat& gt_mask) {
  require_same_shape(pred_mask, gt_mask, "dice");
  require(pred_mask.type() == CV_8U && gt_mask.type() == CV_8U, "dice: masks must be CV_8U");
  std::int64_t inter = 0, total = 0;
  for (int y = 0; y < gt_mask.rows; ++y) {
    const auto* p = pred_mask.ptr<std::uint8_t>(y);
    const auto* g = gt_mask.ptr<std::uint8_t>(y);
    for (int x = 0; x < gt_mask.cols; ++x) {
      const bool a = p[x] != 0;
      const bool b = g[x] != 0;
      inter += a && b;
      total += int(a) + int(b);
    }
  }
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / total;
}

double mae_depth(const cv::Mat& pred_mm, const cv::Mat& gt_mm, const cv::Mat& valid) {
  require_same_shape(pred_mm, gt_mm, "mae_depth");
  require_same_shape(valid, gt_mm, "mae_depth");
  require(pred_mm.type() == CV_32F && gt_mm.type() == CV_32F && valid.type() == CV_8U,
          "mae_depth: expected CV_32F depth maps and a CV_8U mask");
  double sum = 0.0;
  std::int64_t n = 0;
  for (int y = 0; y < gt_mm.rows; ++y) {
    const float* p = pred_mm.ptr<float>(y);
    const float* g = gt_mm.ptr<float>(y);
    const auto* v = valid.ptr<std::uint8_t>(y);
    for (int x = 0; x < gt_mm.cols; ++x) {
      if (!v[x]) continue;
      sum += std::abs(static_cast<double>(p[x]) - g[x]);
      ++n;
    }
  }
  require(n > 0, "mae_depth: empty valid mask");
  return sum / n;
}

cv::Mat argmax_labels(const nn::Tensor<float>& seg_probs, int index) {
  cv::Mat out(seg_probs.h(), seg_probs.w(), CV_8U);
  const std::size_t hw = seg_probs.plane();
  auto* dst = out.ptr<std::uint8_t>(0);
  for (std::size_t k = 0; k < hw; ++k) {
    int best = 0;
    float best_p = seg_probs.channel(index, 0)[k];
    for (int c = 1; c < seg_probs.c(); ++c) {
      const float p = seg_probs.channel(index, c)[k];
      if (p > best_p) {
        best = c;
        best_p = p;
      }
    }
    dst[k] = static_cast<std::uint8_t>(best);
  }
  return out;
}

Predictor model_predictor(const Checkpoint& checkpoint) {
  auto net = std::make_shared<nn::UNet<float>>(checkpoint.config);
  auto params = std::make_shared<nn::ModelParameters<float>>(checkpoint.params);
  const double scale = checkpoint.config.depth_scale_mm;
  return [net, params, scale](const Sample& s) {
    const int h = s.rgb.rows, w = s.rgb.cols;
    nn::Tensor<float> rgb(1, 3, h, w);
    for (int y = 0; y < h; ++y) {
      const auto* row = s.rgb.ptr<cv::Vec3b>(y);
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) rgb(0, c, y, x) = row[x][c] / 255.0f;
    }
    const nn::Prediction<float> pred = net->forward(rgb, *params);
    FramePrediction out;
    out.seg = argmax_labels(pred.seg_probs, 0);
    out.depth_mm = cv::Mat(h, w, CV_32F);
    const float* d = pred.depth_norm.channel(0, 0);
    auto* dst = out.depth_mm.ptr<float>(0);
    for (std::size_t k = 0; k < pred.depth_norm.plane(); ++k)
      dst[k] = static_cast<float>(d[k] * scale);
    return out;
  };
}

CorpusMetrics evaluate_predictions(const Manifest& manifest, Provenance provenance,
                                   const Predictor& predict, const EvalOptions& options) {
  std::vector<SampleRecord> records;
  for (const SampleRecord& r : manifest.records)
    if (r.split == Split::Test && r.provenance == provenance) records.push_back(r);
  require(!records.empty(), "empty test split (no " + to_string(provenance) + " test records)");

  CorpusMetrics m;
  m.samples = records.size();
  double sum_needle = 0.0, sum_instr = 0.0, sum_mae = 0.0;
  Overlap pooled_needle, pooled_instr;
  std::size_t mae_count = 0;
  for (const SampleRecord& r : records) {
    const Sample s = load_sample(r);
    const FramePrediction pred = predict(s);
    require_same_shape(pred.seg, s.seg, "evaluate");
    const Overlap on = overlap(pred.seg, s.seg, static_cast<int>(SegClass::kNeedle));
    const Overlap oi = overlap(pred.seg, s.seg, static_cast<int>(SegClass::kInstrument));
    sum_needle += ratio(on);
    sum_instr += ratio(oi);
    pooled_needle.intersection += on.intersection;
    pooled_needle.total += on.total;
    pooled_instr.intersection += oi.intersection;
    pooled_instr.total += oi.total;
    if (provenance == Provenance::Synthetic && s.has_depth()) {
      require(!pred.depth_mm.empty(), "evaluate: predictor returned no depth for " + s.id);
      cv::Mat valid = s.depth > 0.0f;
      if (cv::countNonZero(valid) == 0) continue;
      sum_mae += mae_depth(pred.depth_mm, s.depth, valid);
      ++mae_count;
    }
  }
  if (options.averaging == DiceAveraging::Macro) {
    m.dice_needle = sum_needle / records.size();
    m.dice_instruments = sum_instr / records.size();
  } else {
    m.dice_needle = ratio(pooled_needle);
    m.dice_instruments = ratio(pooled_instr);
  }
  if (mae_count > 0) m.mae_depth_mm = sum_mae / mae_count;
  return m;
}

CorpusMetrics evaluate(const Checkpoint& checkpoint, const Manifest& manifest,
                       Provenance provenance, const EvalOptions& options) {
  return evaluate_predictions(manifest, provenance, model_predictor(checkpoint), options);
}

DiceAveraging parse_averaging(const std::string& text) {
  if (text == "macro") return DiceAveraging::Macro;
  if (text == "micro") return DiceAveraging::Micro;
  throw ValidationError("eval.averaging must be 'macro' or 'micro', got '" + text + "'");
}

std::string to_string(DiceAveraging averaging) {
  return averaging == DiceAveraging::Macro ? "macro" : "micro";
}

namespace {

nlohmann::json corpus_json(const std::optional<CorpusMetrics>& m) {
  if (!m) return nullptr;
  nlohmann::json j = {{"samples", m->samples},
                      {"dice_needle", m->dice_needle},
                      {"dice_instruments", m->dice_instruments}};
  j["mae_depth_mm"] = m->mae_depth_mm ? nlohmann::json(*m->mae_depth_mm) : nlohmann::json();
  return j;
}

std::string cell(const std::optional<CorpusMetrics>& m, int row) {
  if (!m) return "-";
  char buf[32];
  switch (row) {
    case 0:
      std::snprintf(buf, sizeof buf, "%.2f", m->dice_needle);
      break;
    case 1:
      std::snprintf(buf, sizeof buf, "%.2f", m->dice_instruments);
      break;
    case 2:
      if (!m->mae_depth_mm) return "-";
      std::snprintf(buf, sizeof buf, "%.1f mm", *m->mae_depth_mm);
      break;
    default:
      std::snprintf(buf, sizeof buf, "%zu", m->samples);
  }
  return buf;
}

}  // namespace

nlohmann::json report_to_json(const MetricsReport& report) {
  return {{"averaging", to_string(report.averaging)},
          {"synthetic", corpus_json(report.synthetic)},
          {"real_pre_finetune", corpus_json(report.real_pre_finetune)},
          {"real_post_finetune", corpus_json(report.real_post_finetune)}};
}

std::string report_to_table(const MetricsReport& report) {
  const char* rows[] = {"Needle (Dice)", "Instruments (Dice)", "Depth (MAE)", "Test samples"};
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %12s %16s %17s\n", "", "Synthetic", "Real (pre-ft)",
                "Real (post-ft)");
  os << line;
  for (int r = 0; r < 4; ++r) {
    std::snprintf(line, sizeof line, "%-20s %12s %16s %17s\n", rows[r],
                  cell(report.synthetic, r).c_str(), cell(report.real_pre_finetune, r).c_str(),
                  cell(report.real_post_finetune, r).c_str());
    os << line;
  }
  os << "Dice averaging: " << to_string(report.averaging) << "\n";
  return os.str();
}

}  // namespace suture
