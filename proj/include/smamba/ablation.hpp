#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smamba/data.hpp"
#include "smamba/model.hpp"
#include "smamba/train.hpp"

namespace smamba {

struct AblationGrid {
  bool pieces_sweep = true;
  bool modules = true;
  std::vector<std::size_t> pieces = {2, 4, 6, 8};
};

struct AblationCell {
  std::string section;  // "pieces" or "modules"
  bool gssm = true;
  bool pss = true;
  bool mamba = true;
  std::size_t pieces = 1;
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
};

// Model config for one cell: GSSM off selects the pixelwise variant, PSS off
// collapses to a single piece, Mamba off drops the blocks.
ModelConfig ablation_config(const ModelConfig& base, bool gssm, bool pss, bool mamba, std::size_t pieces);

using AblationProgress = std::function<void(const AblationCell&)>;

std::vector<AblationCell> ablate(const data::HsiCube& cube, const data::LabelMap& train_labels,
                                 const data::LabelMap& test_labels, const ModelConfig& base,
                                 const TrainConfig& tcfg, const AblationGrid& grid,
                                 unsigned threads = 1, const AblationProgress& progress = {});

// Fixed-width text table, one row per cell.
std::string ablation_table(const std::vector<AblationCell>& cells);

}  // namespace smamba
