#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "metadapt/data.hpp"
#include "metadapt/pipeline.hpp"
#include "metadapt/synth.hpp"

namespace metadapt {

/// Where the stream comes from: a CSV file or the synthetic generator.
struct DataSourceConfig {
  std::optional<std::string> csv_path;
  CsvSchema csv_schema = CsvSchema::Features;
  std::optional<SynthConfig> synth;
};

struct ScheduleConfig {
  std::string train_end;  // date token as it appears in the data
  std::string valid_end;
};

struct AppConfig {
  DataSourceConfig data;
  ScheduleConfig schedule;
  PipelineConfig pipeline;
  std::string output_dir = "out";
};

AppConfig default_config();

/// Strict parse: unknown keys anywhere are rejected; absent keys take the
/// documented defaults.
AppConfig config_from_json(const nlohmann::json& doc);
AppConfig load_config(const std::string& path);

/// Full effective configuration (defaults merged), loggable and reloadable.
nlohmann::json config_to_json(const AppConfig& config);

}  // namespace metadapt
