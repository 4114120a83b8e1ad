// Command-line entry point: suture <gen|prepare|train|finetune|eval|infer|overlay> [options]

#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "suture/config.hpp"
#include "suture/error.hpp"
#include "suture/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monocular suturing-support pipeline"};
  std::string stage;
  std::string config_path;
  std::string out_dir;
  std::string seed;
  std::vector<std::string> sets;
  std::string stages_help = "stage to run:";
  for (const std::string& s : suture::pipeline_stages()) stages_help += " " + s;
  app.add_option("stage", stage, stages_help)->required();
  app.add_option("--config", config_path, "YAML configuration file");
  app.add_option("--seed", seed, "global seed (overrides the config)");
  app.add_option("--out", out_dir, "output root (overrides the config)");
  app.add_option("--set", sets, "override, section.key=value (repeatable)")->take_all();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    std::vector<std::string> overrides = sets;
    if (!seed.empty()) overrides.push_back("seed=" + seed);
    if (!out_dir.empty()) overrides.push_back("output=" + out_dir);
    const auto& stages = suture::pipeline_stages();
    if (std::find(stages.begin(), stages.end(), stage) == stages.end())
      throw suture::ValidationError("unknown subcommand '" + stage + "'");
    const suture::PipelineConfig config =
        config_path.empty() ? suture::parse_config("", "<defaults>", overrides)
                            : suture::load_config(config_path, overrides);
    std::cerr << "# stage: " << stage << "\n# seed: " << config.seed << "\n"
              << suture::config_to_yaml(config);
    suture::run_stage(stage, config, std::cerr);
    return 0;
  } catch (const suture::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
}
