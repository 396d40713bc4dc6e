#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tsattr {

// Command-line overrides applied on top of the JSON config.
struct PipelineOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;  // replaces every stage seed
  bool force = false;
  // attribute-stage only: run a single method, optionally overriding steps
  std::optional<std::string> method;
  std::optional<std::size_t> steps;
};

const std::vector<std::string>& available_methods();
const std::vector<std::string>& available_datasets();

// Parses, applies overrides, and validates the whole config up front; throws
// std::runtime_error with a message naming the offending field.
std::string load_experiment_config(const std::string& config_path,
                                   const PipelineOverrides& overrides);

// Stages. Each consumes the previous stage's artifacts from the output
// directory named in the config; run() is their exact composition.
void stage_generate(const std::string& config_json, bool force);
void stage_train(const std::string& config_json);
void stage_attribute(const std::string& config_json,
                     const PipelineOverrides& overrides = {});
void stage_evaluate(const std::string& config_json);

// generate + train + attribute + evaluate, writing report.json at the end.
// On failure writes error.json with the failing stage and rethrows.
void run_pipeline(const std::string& config_json, bool force);

}  // namespace tsattr
