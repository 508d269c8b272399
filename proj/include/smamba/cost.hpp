#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smamba/model.hpp"

namespace smamba {

inline constexpr std::size_t kCostBatch = 64;

// Convention: only weighted layers (linear maps, convolutions, the selective
// scan) contribute MACs. Norms, activations, elementwise products and the
// GSSM spatial contraction count as zero.
inline constexpr const char* kMacConvention =
    "multiply-accumulates of linear, depthwise, pointwise and selective-scan layers; "
    "norms, activations and elementwise products counted as 0";

struct LayerCost {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;  // per sample
};

LayerCost linear_cost(std::string name, std::uint64_t in, std::uint64_t out, std::uint64_t positions = 1);
LayerCost depthwise_cost(std::string name, std::uint64_t channels, std::uint64_t patch);
LayerCost pointwise_cost(std::string name, std::uint64_t channels, std::uint64_t patch);
LayerCost selective_scan_cost(std::string name, std::uint64_t inner, std::uint64_t state, std::uint64_t steps);
LayerCost layer_norm_cost(std::string name, std::uint64_t features);

// Closed-form per-layer tally for a configuration.
std::vector<LayerCost> layer_plan(const ModelConfig& cfg);

struct CostReport {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::size_t batch = kCostBatch;
  std::vector<LayerCost> layers;
};

CostReport cost_report(const ModelConfig& cfg, std::size_t batch = kCostBatch);

std::uint64_t count_params(std::span<const LayerCost> plan);
std::uint64_t count_macs(std::span<const LayerCost> plan, std::size_t batch = kCostBatch);
std::uint64_t count_macs(const ModelConfig& cfg, std::size_t batch = kCostBatch);

// Element count over the actual tensors.
std::uint64_t count_params(const ModelWeights& w);
std::uint64_t count_params(std::span<const Tensor> tensors);

}  // namespace smamba
