#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tsattr/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"time-series attribution benchmark runner"};
  app.require_subcommand(1);

  std::string config_path;
  tsattr::PipelineOverrides overrides;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::size_t> steps;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", out_dir, "override the output directory");
    cmd->add_option("--seed", seed, "override every stage seed");
    cmd->add_flag("--force", overrides.force, "overwrite existing outputs");
    return cmd;
  };

  CLI::App* run = add_common(app.add_subcommand("run", "generate, train, attribute, evaluate"));
  CLI::App* generate = add_common(app.add_subcommand("generate", "write the dataset artifacts"));
  CLI::App* train = add_common(app.add_subcommand("train", "build or train the model"));
  CLI::App* attribute = add_common(app.add_subcommand("attribute", "write per-method attributions"));
  attribute->add_option("--method", method, "run a single method instead of the config list");
  attribute->add_option("--steps", steps, "override the method's step count");
  CLI::App* evaluate = add_common(app.add_subcommand("evaluate", "write metrics.csv and report.json"));

  CLI11_PARSE(app, argc, argv);

  overrides.out_dir = out_dir;
  overrides.seed = seed;
  overrides.method = method;
  overrides.steps = steps;

  try {
    const std::string cfg = tsattr::load_experiment_config(config_path, overrides);
    if (run->parsed()) tsattr::run_pipeline(cfg, overrides.force);
    if (generate->parsed()) tsattr::stage_generate(cfg, overrides.force);
    if (train->parsed()) tsattr::stage_train(cfg);
    if (attribute->parsed()) tsattr::stage_attribute(cfg, overrides);
    if (evaluate->parsed()) tsattr::stage_evaluate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
