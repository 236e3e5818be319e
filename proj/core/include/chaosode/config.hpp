#pragma once

/// \file config.hpp
/// Run configuration as JSON. Parsing overlays the user document on the
/// defaults, rejects keys the defaults do not have, and the resolved
/// document is what gets echoed into outputs.
///
/// Sections: data, model, pipeline, scenario, output.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaosode/bench.hpp"
#include "chaosode/pipeline.hpp"

namespace chaosode {

struct DataConfig {
  std::size_t n = 35;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> x0{1.0, 1.0};
  std::pair<double, double> span{0.0, 7.0};
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"jsonl", "csv"};
};

struct RunConfig {
  DataConfig data;
  PipelineConfig pipeline;  // includes the model section
  ScenarioConfig scenario;
  OutputConfig output;
};

nlohmann::json to_json(const ModelConfig& c);
nlohmann::json to_json(const PipelineConfig& c);  // without the model section
nlohmann::json to_json(const DataConfig& c);
nlohmann::json to_json(const ScenarioConfig& c);
nlohmann::json to_json(const OutputConfig& c);
nlohmann::json to_json(const RunConfig& c);

/// {"model": ..., "pipeline": ...} for one run; echoed into records.
nlohmann::json pipeline_echo(const PipelineConfig& c);

/// Strict parse; throws ConfigError naming the offending key path.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

/// Inverse of pipeline_echo.
PipelineConfig pipeline_from_echo(const nlohmann::json& echo);

}  // namespace chaosode
