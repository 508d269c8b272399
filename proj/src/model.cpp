#include "smamba/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "smamba/error.hpp"
#include "smamba/ops.hpp"

namespace smamba {

std::string variant_name(Variant v) {
  return v == Variant::kPixelwise ? "pixelwise" : "patchwise";
}

Variant parse_variant(const std::string& name) {
  if (name == "pixelwise") return Variant::kPixelwise;
  if (name == "patchwise") return Variant::kPatchwise;
  throw ConfigError("unknown variant '" + name + "' (expected pixelwise or patchwise)");
}

std::size_t ModelConfig::piece_len() const {
  if (pieces == 0) return 0;
  return (bands + pieces - 1) / pieces;
}

void ModelConfig::validate() const {
  if (bands == 0) throw ConfigError("model: bands must be >= 1");
  if (pieces == 0) throw ConfigError("model: pieces must be >= 1");
  if (pieces > bands) {
    throw ConfigError("model: pieces R=" + std::to_string(pieces) + " exceeds bands L=" +
                      std::to_string(bands));
  }
  const std::size_t len = piece_len();
  if (len * pieces - bands >= len) {
    throw ConfigError("model: R=" + std::to_string(pieces) + " leaves a piece made only of padding for L=" +
                      std::to_string(bands));
  }
  if (state == 0 || expand == 0 || classes == 0) {
    throw ConfigError("model: state, expand and classes must be >= 1");
  }
  if (mamba && depth == 0) throw ConfigError("model: depth must be >= 1");
  if (variant == Variant::kPatchwise && (patch == 0 || patch % 2 == 0)) {
    throw ConfigError("model: patch size must be odd, got " + std::to_string(patch));
  }
}

std::vector<NamedTensor> ModelWeights::parameters() {
  std::vector<NamedTensor> out;
  auto add = [&](std::string name, Tensor& t) { out.push_back({std::move(name), &t}); };
  if (gssm) {
    add("gssm.dw_kernel", gssm->dw_kernel);
    add("gssm.dw_bias", gssm->dw_bias);
    add("gssm.pw_weight", gssm->pw_weight);
    add("gssm.pw_bias", gssm->pw_bias);
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& b = blocks[i];
    const std::string p = "block" + std::to_string(i) + ".";
    add(p + "ln_in.gamma", b.ln_in.gamma);
    add(p + "ln_in.beta", b.ln_in.beta);
    add(p + "expand.weight", b.expand.weight);
    add(p + "expand.bias", b.expand.bias);
    add(p + "keep.weight", b.keep.weight);
    add(p + "keep.bias", b.keep.bias);
    add(p + "ssm.a_log", b.ssm.a_log);
    add(p + "ssm.w_delta", b.ssm.w_delta);
    add(p + "ssm.b_delta", b.ssm.b_delta);
    add(p + "ssm.w_b", b.ssm.w_b);
    add(p + "ssm.b_b", b.ssm.b_b);
    add(p + "ssm.w_c", b.ssm.w_c);
    add(p + "ssm.b_c", b.ssm.b_c);
    add(p + "ssm.skip_d", b.ssm.skip_d);
    add(p + "ln_state.gamma", b.ln_state.gamma);
    add(p + "ln_state.beta", b.ln_state.beta);
    add(p + "compress.weight", b.compress.weight);
    add(p + "compress.bias", b.compress.bias);
    add(p + "gate.weight", b.gate.weight);
    add(p + "gate.bias", b.gate.bias);
  }
  add("pre_layer.weight", pre_layer.weight);
  add("pre_layer.bias", pre_layer.bias);
  add("head.weight", head.weight);
  add("head.bias", head.bias);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelWeights::parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<ModelWeights*>(this)->parameters()) out.emplace_back(name, t);
  return out;
}

namespace {

Tensor uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

LinearWeights init_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {uniform({in, out}, in, rng), Tensor::zeros({out}, true)};
}

LayerNormWeights init_norm(std::size_t d) {
  return {Tensor::filled({d}, 1.0, true), Tensor::zeros({d}, true)};
}

}  // namespace

ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelWeights w;
  const std::size_t bands = cfg.bands, r = cfg.pieces, inner = cfg.inner();
  if (cfg.variant == Variant::kPatchwise) {
    GssmWeights g;
    g.dw_kernel = uniform({bands, 3, 3}, 9, rng);
    g.dw_bias = Tensor::zeros({bands}, true);
    g.pw_weight = uniform({bands, bands}, bands, rng);
    g.pw_bias = Tensor::zeros({bands}, true);
    w.gssm = std::move(g);
  }
  if (cfg.mamba) {
    for (std::size_t i = 0; i < cfg.depth; ++i) {
      MambaBlockWeights b;
      b.ln_in = init_norm(r);
      b.expand = init_linear(r, inner, rng);
      b.keep = init_linear(inner, inner, rng);
      b.ssm = ssm::init_selective(inner, cfg.state, rng);
      b.ln_state = init_norm(inner);
      b.compress = init_linear(inner, r, rng);
      b.gate = init_linear(r, r, rng);
      w.blocks.push_back(std::move(b));
    }
  }
  w.pre_layer = init_linear(r, 1, rng);
  w.head = init_linear(cfg.piece_len(), cfg.classes, rng);
  return w;
}

ModelWeights track(Graph& g, const ModelWeights& w) {
  ModelWeights out = w;
  for (auto& p : out.parameters()) *p.tensor = g.track(*p.tensor);
  return out;
}

void check_weights(const ModelConfig& cfg, const ModelWeights& w) {
  ModelWeights expected = init_weights(cfg, 0);
  const auto want = expected.parameters();
  const auto have = w.parameters();
  if (want.size() != have.size()) {
    throw ContractError("weights hold " + std::to_string(have.size()) + " tensors, config expects " +
                        std::to_string(want.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].name != have[i].first || want[i].tensor->shape() != have[i].second->shape()) {
      throw ContractError("weight " + have[i].first + shape_str(have[i].second->shape()) +
                          " does not match config (" + want[i].name +
                          shape_str(want[i].tensor->shape()) + ")");
    }
  }
}

std::vector<std::size_t> pss_index(std::size_t bands, std::size_t pieces) {
  if (pieces == 0 || bands == 0) throw ConfigError("pss: bands and pieces must be >= 1");
  if (pieces > bands) {
    throw ConfigError("pss: pieces R=" + std::to_string(pieces) + " exceeds bands L=" +
                      std::to_string(bands));
  }
  const std::size_t len = (bands + pieces - 1) / pieces;
  std::vector<std::size_t> idx(len * pieces);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t r = 0; r < pieces; ++r) idx[t * pieces + r] = std::min(r * len + t, bands - 1);
  }
  return idx;
}

std::vector<double> pss_scan(std::span<const double> spectrum, std::size_t pieces) {
  const auto idx = pss_index(spectrum.size(), pieces);
  std::vector<double> m(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) m[i] = spectrum[idx[i]];
  return m;
}

std::vector<double> pss_unscan(std::span<const double> matrix, std::size_t pieces, std::size_t bands) {
  if (pieces == 0 || matrix.size() % pieces != 0) {
    throw DimensionError("pss_unscan: matrix size " + std::to_string(matrix.size()) +
                         " is not a multiple of R=" + std::to_string(pieces));
  }
  const std::size_t len = matrix.size() / pieces;
  if (len * pieces < bands) throw DimensionError("pss_unscan: matrix too small for L bands");
  std::vector<double> out(bands);
  for (std::size_t i = 0; i < bands; ++i) out[i] = matrix[(i % len) * pieces + i / len];
  return out;
}

Tensor pss_scan(Graph& g, const Tensor& spectrum, std::size_t pieces) {
  if (spectrum.rank() != 1) {
    throw DimensionError("pss_scan: spectrum must be 1-D, got " + shape_str(spectrum.shape()));
  }
  const std::size_t bands = spectrum.dim(0);
  auto idx = pss_index(bands, pieces);
  const std::size_t len = idx.size() / pieces;
  return ops::gather(g, spectrum, std::move(idx), {len, pieces});
}

Tensor gssm_mask(Graph& g, const Tensor& patch, const GssmWeights& w) {
  if (patch.rank() != 3 || patch.dim(1) != patch.dim(2)) {
    throw DimensionError("gssm: patch must be [L,P,P], got " + shape_str(patch.shape()));
  }
  const Tensor dw = ops::depthwise_conv2d(g, patch, w.dw_kernel, w.dw_bias);
  const Tensor pw = ops::pointwise_conv2d(g, dw, w.pw_weight, w.pw_bias);
  return ops::activation(g, pw, ops::Activation::kSigmoid);
}

Tensor gssm_merge(Graph& g, const Tensor& patch, const GssmWeights& w) {
  const Tensor mask = gssm_mask(g, patch, w);
  return ops::spatial_contract(g, mask, patch);
}

Tensor mamba_block(Graph& g, const Tensor& seq, const MambaBlockWeights& w) {
  if (seq.rank() != 2 || seq.dim(1) != w.ln_in.gamma.dim(0)) {
    throw DimensionError("mamba_block: sequence " + shape_str(seq.shape()) +
                         " does not match feature size " + std::to_string(w.ln_in.gamma.dim(0)));
  }
  const Tensor u = ops::layer_norm(g, seq, w.ln_in.gamma, w.ln_in.beta);
  Tensor h = ops::linear(g, u, w.expand.weight, w.expand.bias);
  h = ops::linear(g, h, w.keep.weight, w.keep.bias);
  h = ops::activation(g, h, ops::Activation::kSilu);
  h = ssm::selective_scan(g, h, w.ssm);
  h = ops::layer_norm(g, h, w.ln_state.gamma, w.ln_state.beta);
  const Tensor main = ops::linear(g, h, w.compress.weight, w.compress.bias);
  const Tensor gate =
      ops::activation(g, ops::linear(g, u, w.gate.weight, w.gate.bias), ops::Activation::kSigmoid);
  return ops::add(g, seq, ops::mul(g, gate, main));
}

Tensor forward(Graph& g, const Tensor& input, const ModelWeights& w, const ModelConfig& cfg) {
  Tensor spectrum;
  if (cfg.variant == Variant::kPatchwise) {
    if (input.rank() != 3 || input.dim(0) != cfg.bands || input.dim(1) != cfg.patch ||
        input.dim(2) != cfg.patch) {
      throw ContractError("forward: patchwise model expects a [" + std::to_string(cfg.bands) + "," +
                          std::to_string(cfg.patch) + "," + std::to_string(cfg.patch) +
                          "] patch, got " + shape_str(input.shape()));
    }
    if (!w.gssm) throw ContractError("forward: patchwise model without GSSM weights");
    spectrum = gssm_merge(g, input, *w.gssm);
  } else {
    if (input.rank() != 1 || input.dim(0) != cfg.bands) {
      throw ContractError("forward: pixelwise model expects a [" + std::to_string(cfg.bands) +
                          "] spectrum, got " + shape_str(input.shape()));
    }
    if (w.gssm) throw ContractError("forward: pixelwise model given GSSM weights");
    spectrum = input;
  }
  Tensor seq = pss_scan(g, spectrum, cfg.pieces);
  for (const auto& block : w.blocks) seq = mamba_block(g, seq, block);
  Tensor v = ops::linear(g, seq, w.pre_layer.weight, w.pre_layer.bias);
  v = ops::reshape(g, v, {1, cfg.piece_len()});
  const Tensor logits = ops::linear(g, v, w.head.weight, w.head.bias);
  return ops::reshape(g, logits, {cfg.classes});
}

std::size_t predict(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("predict: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

}  // namespace smamba
