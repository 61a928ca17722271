#pragma once

#include <string>

#include <json.hpp>

#include "spdagg/grad_check.hpp"
#include "spdagg/network.hpp"
#include "spdagg/train.hpp"

namespace spdagg {

/// Pipeline and training settings read from one flat JSON object whose keys
/// are the lower_snake_case field names of PipelineConfig and TrainConfig.
struct RunConfig {
    PipelineConfig pipeline;
    TrainConfig train;
    /// Keys present in the source document, for callers that fill defaults
    /// from data (e.g. in_channels).
    nlohmann::json given = nlohmann::json::object();
};

/// Unknown keys and wrongly typed values raise ContractError.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const PipelineConfig& cfg);
nlohmann::json to_json(const TrainConfig& tc);

nlohmann::json to_json(const GradCheckReport& report);
/// One metrics line. wall_ms is written as recorded; callers zero it for
/// reproducible files.
nlohmann::json to_json(const EpochMetrics& m);

}  // namespace spdagg
