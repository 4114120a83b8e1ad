#pragma once

// Subcommand implementations shared by the command-line tool and the tests.
// Every stage reads its inputs from the output root and writes its artifacts there:
//   synthetic/   rendered frames + manifest.jsonl          (gen)
//   prepared/    resized crops + manifest.jsonl            (prepare)
//   checkpoints/ joint.ckpt, finetuned.ckpt                (train, finetune)
//   logs/        train.jsonl, finetune.jsonl
//   eval/        report.json, report.txt                   (eval)
//   predictions/ <id>_seg.png, <id>_depth.png + manifest   (infer)
//   overlay/     <id>.png, <id>.json, metrics.jsonl        (overlay)

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "suture/config.hpp"

namespace suture {

const std::vector<std::string>& pipeline_stages();

struct StagePaths {
  std::filesystem::path root;

  std::filesystem::path synthetic() const { return root / "synthetic"; }
  std::filesystem::path prepared() const { return root / "prepared"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path joint_checkpoint() const { return checkpoints() / "joint.ckpt"; }
  std::filesystem::path finetuned_checkpoint() const { return checkpoints() / "finetuned.ckpt"; }
  std::filesystem::path logs() const { return root / "logs"; }
  std::filesystem::path eval() const { return root / "eval"; }
  std::filesystem::path predictions() const { return root / "predictions"; }
  std::filesystem::path overlay() const { return root / "overlay"; }
};

/// Runs one stage. Throws ValidationError for bad input (including an unknown stage)
/// and RuntimeFailure / IoError for failures while running. Progress goes to `log`.
void run_stage(const std::string& stage, const PipelineConfig& config, std::ostream& log);

}  // namespace suture
