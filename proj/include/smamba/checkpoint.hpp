#pragma once

#include <filesystem>

#include "smamba/model.hpp"

namespace smamba {

// SPMW1 layout:
//   bytes 0..4   "SPMW1"
//   bytes 5..12  manifest length M, uint64 little-endian
//   next M bytes manifest JSON: {"config": {...}, "tensors": [{"name", "shape", "offset"}, ...]}
//   remainder    float64 little-endian tensor data; offsets are relative to its start
struct Checkpoint {
  ModelConfig config;
  ModelWeights weights;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelWeights& w);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace smamba
