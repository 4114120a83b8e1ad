#include "suture/pipeline.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "suture/checkpoint.hpp"
#include "suture/dataset.hpp"
#include "suture/error.hpp"
#include "suture/eval.hpp"
#include "suture/geometry.hpp"
#include "suture/image_io.hpp"
#include "suture/overlay.hpp"
#include "suture/scenegen.hpp"
#include "suture/training.hpp"

namespace suture {

namespace fs = std::filesystem;

namespace {

Manifest require_manifest(const fs::path& path, const char* producer) {
  if (!fs::exists(path))
    throw ValidationError("missing " + path.string() + "; run '" + producer + "' first");
  return read_manifest(path);
}

Checkpoint require_checkpoint(const fs::path& path, const char* producer) {
  if (!fs::exists(path))
    throw ValidationError("missing " + path.string() + "; run '" + producer + "' first");
  return load_checkpoint(path);
}

Manifest filter(const Manifest& m, Provenance provenance) {
  Manifest out;
  for (const SampleRecord& r : m.records)
    if (r.provenance == provenance) out.records.push_back(r);
  return out;
}

class JsonlLog {
 public:
  explicit JsonlLog(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot write log", path);
  }
  void write(const nlohmann::json& j) { out_ << j.dump() << "\n" << std::flush; }

 private:
  std::ofstream out_;
};

TrainCallbacks logging_callbacks(JsonlLog& jsonl, std::ostream& log) {
  TrainCallbacks cb;
  cb.on_epoch = [&jsonl, &log](const EpochLog& e) {
    nlohmann::json j = {{"phase", to_string(e.phase)}, {"epoch", e.epoch}, {"steps", e.steps},
                        {"loss", e.loss},              {"ce", e.ce}};
    if (e.phase == TrainPhase::JointSynthetic) j["mse"] = e.mse;
    jsonl.write(j);
    log << to_string(e.phase) << " epoch " << e.epoch << " steps " << e.steps << " loss "
        << e.loss << "\n";
  };
  return cb;
}

void stage_gen(const PipelineConfig& c, const StagePaths& p, std::ostream& log) {
  const Manifest m = generate_dataset(c.scene_count, c.scene, p.synthetic());
  log << "gen: wrote " << m.records.size() << " frames (" << m.count(Split::Test)
      << " test) to " << p.synthetic().string() << "\n";
}

void stage_prepare(const PipelineConfig& c, const StagePaths& p, std::ostream& log) {
  const Manifest synthetic = require_manifest(p.synthetic() / "manifest.jsonl", "gen");
  std::optional<Manifest> real;
  if (c.real_dir) real = ingest_real_directory(*c.real_dir, c.real_test_fraction,
                                               c.stage_seed("real-split"));
  const Manifest corpus = build_training_corpus(synthetic, real, c.augmentation, p.prepared());
  log << "prepare: " << corpus.count(Split::Train) << " train / " << corpus.count(Split::Test)
      << " test records in " << p.prepared().string() << "\n";
}

void stage_train(const PipelineConfig& c, const StagePaths& p, std::ostream& log) {
  const Manifest corpus = filter(require_manifest(p.prepared() / "manifest.jsonl", "prepare"),
                                 Provenance::Synthetic);
  const Checkpoint init = Checkpoint::initialize(c.model, c.stage_seed("init"));
  fs::create_directories(p.logs());
  fs::create_directories(p.checkpoints());
  JsonlLog jsonl(p.logs() / "train.jsonl");
  const Checkpoint out =
      train_joint(corpus, init, c.optimizer, c.loss, logging_callbacks(jsonl, log));
  save_checkpoint(p.joint_checkpoint(), out);
  log << "train: " << out.meta.steps << " steps, checkpoint " << p.joint_checkpoint().string()
      << "\n";
}

void stage_finetune(const PipelineConfig& c, const StagePaths& p, std::ostream& log) {
  const Manifest corpus = filter(require_manifest(p.prepared() / "manifest.jsonl", "prepare"),
                                 Provenance::Real);
  if (corpus.count(Split::Train) == 0)
    throw ValidationError("finetune: no real training records; set dataset.real_dir and rerun "
                          "'prepare'");
  const Checkpoint joint = require_checkpoint(p.joint_checkpoint(), "train");
  fs::create_directories(p.logs());
  JsonlLog jsonl(p.logs() / "finetune.jsonl");
  OptimizerConfig opt = c.optimizer;
  opt.seed = c.stage_seed("finetune");
  FinetuneOptions options;
  options.reject_synthetic = true;
  const Checkpoint out =
      finetune_seg(corpus, joint, opt, c.loss, logging_callbacks(jsonl, log), options);
  save_checkpoint(p.finetuned_checkpoint(), out);
  log << "finetune: " << out.meta.steps << " steps, checkpoint "
      << p.finetuned_checkpoint().string() << "\n";
}

void stage_eval(const PipelineConfig& c, const StagePaths& p, std::ostream& log) {
  const Manifest corpus = require_manifest(p.prepared() / "manifest.jsonl", "prepare");
  if (corpus.count(Split::Test) == 0) throw ValidationError("empty test split");
  const Checkpoint joint = require_checkpoint(p.joint_checkpoint(), "train");
  const Manifest synthetic = filter(corpus, Provenance::Synthetic);
  const Manifest real = filter(corpus, Provenance::Real);
  MetricsReport report;
  report.averaging = c.eval.averaging;
  if (synthetic.count(Split::Test) > 0)
    report.synthetic = evaluate(joint, synthetic, Provenance::Synthetic, c.eval);
  if (real.count(Split::Test) > 0) {
    report.real_pre_finetune = evaluate(joint, real, Provenance::Real, c.eval);
    if (fs::exists(p.finetuned_checkpoint()))
      report.real_post_finetune =
          evaluate(load_checkpoint(p.finetuned_checkpoint()), real, Provenance::Real, c.eval);
  }
  fs::create_directories(p.eval());
  const std::string table = report_to_table(report);
  {
    std::ofstream json(p.eval() / "report.json", std::ios::trunc);
    json << report_to_json(report).dump(2) << "\n";
    std::ofstream txt(p.eval() / "report.txt", std::ios::trunc);
    txt << table;
    if (!json || !txt) throw IoError("cannot write report", p.eval());
  }
  log << table;
}

void stage_infer(const PipelineConfig& c, const StagePaths& p, std::ostream& log) {
  const Manifest corpus = require_manifest(p.prepared() / "manifest.jsonl", "prepare");
  const std::vector<SampleRecord> test = corpus.select(Split::Test);
  if (test.empty()) throw ValidationError("empty test split");
  const bool finetuned = fs::exists(p.finetuned_checkpoint());
  const Checkpoint ck = finetuned ? load_checkpoint(p.finetuned_checkpoint())
                                  : require_checkpoint(p.joint_checkpoint(), "train");
  const Predictor predict = model_predictor(ck);
  fs::create_directories(p.predictions());
  Manifest out;
  for (const SampleRecord& r : test) {
    const Sample s = load_sample(r);
    const FramePrediction pred = predict(s);
    SampleRecord rec = r;
    rec.seg_path = p.predictions() / (r.id + "_seg.png");
    rec.depth_path = p.predictions() / (r.id + "_depth.png");
    write_seg_png(rec.seg_path, pred.seg);
    write_depth_png(*rec.depth_path, pred.depth_mm);
    out.records.push_back(rec);
  }
  write_manifest(p.predictions() / "manifest.jsonl", out);
  log << "infer: " << out.records.size() << " predictions with "
      << (finetuned ? "finetuned" : "joint") << " checkpoint\n";
  (void)c;
}

void stage_overlay(const PipelineConfig& c, const StagePaths& p, std::ostream& log) {
  std::vector<SampleRecord> records;
  if (c.geometry_source == GeometrySource::Predicted) {
    records = require_manifest(p.predictions() / "manifest.jsonl", "infer").records;
  } else {
    records = require_manifest(p.prepared() / "manifest.jsonl", "prepare").select(Split::Test);
  }
  if (records.empty()) throw ValidationError("overlay: no frames to process");
  fs::create_directories(p.overlay());
  JsonlLog metrics(p.overlay() / "metrics.jsonl");
  int written = 0, skipped = 0;
  for (const SampleRecord& r : records) {
    if (!r.camera || !r.depth_path) {
      log << "overlay: skipping " << r.id << " (no camera intrinsics or depth)\n";
      ++skipped;
      continue;
    }
    const Sample s = load_sample(r);
    const FrameGeometry g = analyze_frame(s.depth, s.seg, *r.camera, c.geometry);
    write_rgb_png(p.overlay() / (r.id + ".png"), render_overlay(s.rgb, *r.camera, g));
    nlohmann::json j = geometry_to_json(g);
    j["id"] = r.id;
    {
      std::ofstream out(p.overlay() / (r.id + ".json"), std::ios::trunc);
      out << j.dump(2) << "\n";
    }
    metrics.write(j);
    ++written;
  }
  log << "overlay: " << written << " frames written, " << skipped << " skipped\n";
}

}  // namespace

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages{"gen",  "prepare", "train",  "finetune",
                                               "eval", "infer",   "overlay"};
  return stages;
}

void run_stage(const std::string& stage, const PipelineConfig& config, std::ostream& log) {
  const StagePaths paths{config.output};
  if (stage == "gen") return stage_gen(config, paths, log);
  if (stage == "prepare") return stage_prepare(config, paths, log);
  if (stage == "train") return stage_train(config, paths, log);
  if (stage == "finetune") return stage_finetune(config, paths, log);
  if (stage == "eval") return stage_eval(config, paths, log);
  if (stage == "infer") return stage_infer(config, paths, log);
  if (stage == "overlay") return stage_overlay(config, paths, log);
  throw ValidationError("unknown subcommand '" + stage + "'");
}

}  // namespace suture
