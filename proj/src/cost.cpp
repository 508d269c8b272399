#include "smamba/cost.hpp"

namespace smamba {

LayerCost linear_cost(std::string name, std::uint64_t in, std::uint64_t out, std::uint64_t positions) {
  return {std::move(name), in * out + out, positions * in * out};
}

LayerCost depthwise_cost(std::string name, std::uint64_t channels, std::uint64_t patch) {
  return {std::move(name), channels * 9 + channels, channels * patch * patch * 9};
}

LayerCost pointwise_cost(std::string name, std::uint64_t channels, std::uint64_t patch) {
  return {std::move(name), channels * channels + channels, channels * channels * patch * patch};
}

LayerCost selective_scan_cost(std::string name, std::uint64_t inner, std::uint64_t state, std::uint64_t steps) {
  // a_log, w_delta, b_delta, w_b, b_b, w_c, b_c, skip_d
  const std::uint64_t params = inner * state + inner * inner + inner + 2 * (inner * state + state) + inner;
  const std::uint64_t per_step = inner * inner + 2 * inner * state + 3 * state * inner;
  return {std::move(name), params, steps * per_step};
}

LayerCost layer_norm_cost(std::string name, std::uint64_t features) {
  return {std::move(name), 2 * features, 0};
}

std::vector<LayerCost> layer_plan(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<LayerCost> plan;
  const std::uint64_t bands = cfg.bands, r = cfg.pieces, inner = cfg.inner(), len = cfg.piece_len();
  if (cfg.variant == Variant::kPatchwise) {
    plan.push_back(depthwise_cost("gssm.depthwise", bands, cfg.patch));
    plan.push_back(pointwise_cost("gssm.pointwise", bands, cfg.patch));
  }
  if (cfg.mamba) {
    for (std::size_t i = 0; i < cfg.depth; ++i) {
      const std::string p = "block" + std::to_string(i) + ".";
      plan.push_back(layer_norm_cost(p + "ln_in", r));
      plan.push_back(linear_cost(p + "expand", r, inner, len));
      plan.push_back(linear_cost(p + "keep", inner, inner, len));
      plan.push_back(selective_scan_cost(p + "ssm", inner, cfg.state, len));
      plan.push_back(layer_norm_cost(p + "ln_state", inner));
      plan.push_back(linear_cost(p + "compress", inner, r, len));
      plan.push_back(linear_cost(p + "gate", r, r, len));
    }
  }
  plan.push_back(linear_cost("pre_layer", r, 1, len));
  plan.push_back(linear_cost("head", len, cfg.classes));
  return plan;
}

std::uint64_t count_params(std::span<const LayerCost> plan) {
  std::uint64_t n = 0;
  for (const auto& l : plan) n += l.params;
  return n;
}

std::uint64_t count_macs(std::span<const LayerCost> plan, std::size_t batch) {
  std::uint64_t n = 0;
  for (const auto& l : plan) n += l.macs;
  return n * batch;
}

std::uint64_t count_macs(const ModelConfig& cfg, std::size_t batch) {
  return count_macs(layer_plan(cfg), batch);
}

CostReport cost_report(const ModelConfig& cfg, std::size_t batch) {
  CostReport r;
  r.layers = layer_plan(cfg);
  r.params = count_params(r.layers);
  r.macs = count_macs(r.layers, batch);
  r.batch = batch;
  return r;
}

std::uint64_t count_params(const ModelWeights& w) {
  std::uint64_t n = 0;
  for (const auto& [name, t] : w.parameters()) n += t->numel();
  return n;
}

std::uint64_t count_params(std::span<const Tensor> tensors) {
  std::uint64_t n = 0;
  for (const auto& t : tensors) n += t.numel();
  return n;
}

}  // namespace smamba
