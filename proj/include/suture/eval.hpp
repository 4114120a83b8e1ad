#pragma once

// Per-class Dice, depth MAE and the test-set report (synthetic, real before and
// after fine-tuning).

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "suture/checkpoint.hpp"
#include "suture/dataset.hpp"
#include "suture/manifest.hpp"

namespace suture {

/// 2|A∩B| / (|A| + |B|) over non-zero pixels of two CV_8U masks; 1.0 when both are empty.
double dice(const cv::Mat& pred_mask, const cv::Mat& gt_mask);

/// Mean |pred - gt| (CV_32F, mm) over pixels where valid (CV_8U) is non-zero.
double mae_depth(const cv::Mat& pred_mm, const cv::Mat& gt_mm, const cv::Mat& valid);

/// Per-pixel argmax over class probabilities (ties go to the lowest class id).
cv::Mat argmax_labels(const nn::Tensor<float>& seg_probs, int index);

struct FramePrediction {
  cv::Mat seg;       // CV_8U class ids
  cv::Mat depth_mm;  // CV_32F; may be empty when depth is not predicted
};

using Predictor = std::function<FramePrediction(const Sample&)>;

/// Wraps a checkpoint as a predictor (eval-mode forward, batch of one).
Predictor model_predictor(const Checkpoint& checkpoint);

enum class DiceAveraging { Macro, Micro };

struct CorpusMetrics {
  std::size_t samples = 0;
  double dice_needle = 0.0;
  double dice_instruments = 0.0;
  std::optional<double> mae_depth_mm;  // synthetic corpora only

  bool operator==(const CorpusMetrics&) const = default;
};

struct EvalOptions {
  DiceAveraging averaging = DiceAveraging::Macro;
};

/// Scores `predict` on the test-split records of `manifest` with the given provenance.
/// MAE is averaged per image over valid (non-zero ground-truth) pixels.
/// Throws ValidationError("empty test split") when there is nothing to score.
CorpusMetrics evaluate_predictions(const Manifest& manifest, Provenance provenance,
                                   const Predictor& predict, const EvalOptions& options = {});

CorpusMetrics evaluate(const Checkpoint& checkpoint, const Manifest& manifest,
                       Provenance provenance, const EvalOptions& options = {});

struct MetricsReport {
  std::optional<CorpusMetrics> synthetic;
  std::optional<CorpusMetrics> real_pre_finetune;
  std::optional<CorpusMetrics> real_post_finetune;
  DiceAveraging averaging = DiceAveraging::Macro;
};

nlohmann::json report_to_json(const MetricsReport& report);
/// Fixed-width table with classes as rows and corpora as columns.
std::string report_to_table(const MetricsReport& report);

DiceAveraging parse_averaging(const std::string& text);
std::string to_string(DiceAveraging averaging);

}  // namespace suture
