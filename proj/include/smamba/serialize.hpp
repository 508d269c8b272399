#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "smamba/ablation.hpp"
#include "smamba/cost.hpp"
#include "smamba/metrics.hpp"
#include "smamba/model.hpp"
#include "smamba/split.hpp"
#include "smamba/train.hpp"

namespace smamba {

using nlohmann::json;

json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& j);
json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);
json to_json(const data::SplitSpec& spec);

json to_json(const CostReport& report, const ModelConfig& cfg);

// {"oa","aa","kappa","ca","confusion","params","macs","config","seed"}
json metrics_json(const Metrics& m, const ModelConfig& cfg, std::uint64_t params, std::uint64_t macs,
                  std::uint64_t seed);

json to_json(const std::vector<AblationCell>& cells);

// Replayable split: per-class train/test flat pixel indices (row * W + col).
json split_to_json(const data::Split& split, const data::SplitSpec& spec);
data::Split split_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace smamba
