#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smamba/ssm.hpp"
#include "smamba/tensor.hpp"

namespace smamba {

enum class Variant { kPixelwise, kPatchwise };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  std::size_t bands = 0;
  std::size_t pieces = 1;  // R
  std::size_t state = 16;  // N
  std::size_t expand = 8;  // E
  std::size_t patch = 3;   // P, patchwise only
  std::size_t classes = 2;
  std::size_t depth = 1;   // number of Mamba blocks
  Variant variant = Variant::kPatchwise;
  bool mamba = true;       // false replaces the blocks with the identity

  // ceil(bands / pieces)
  std::size_t piece_len() const;
  std::size_t inner() const { return expand * pieces; }
  void validate() const;
};

struct LinearWeights {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct LayerNormWeights {
  Tensor gamma;
  Tensor beta;
};

struct GssmWeights {
  Tensor dw_kernel;  // [L, 3, 3]
  Tensor dw_bias;    // [L]
  Tensor pw_weight;  // [L, L]
  Tensor pw_bias;    // [L]
};

struct MambaBlockWeights {
  LayerNormWeights ln_in;     // over R
  LinearWeights expand;       // R -> E*R
  LinearWeights keep;         // E*R -> E*R
  ssm::SelectiveSsmParams ssm;
  LayerNormWeights ln_state;  // over E*R
  LinearWeights compress;     // E*R -> R
  LinearWeights gate;         // R -> R, excitation stream
};

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct ModelWeights {
  std::optional<GssmWeights> gssm;
  std::vector<MambaBlockWeights> blocks;
  LinearWeights pre_layer;  // R -> 1, shared over positions
  LinearWeights head;       // piece_len -> K

  // Stable, ordered list of every learnable tensor.
  std::vector<NamedTensor> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;
};

ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed);

// Copy of `w` whose learnable tensors are leaves of `g`.
ModelWeights track(Graph& g, const ModelWeights& w);

// Throws ContractError when the tensor layout does not fit the config.
void check_weights(const ModelConfig& cfg, const ModelWeights& w);

// Piece-wise sequential scanning. Returns a row-major [piece_len, pieces]
// matrix whose column r is the r-th contiguous piece; a short tail is padded
// with the last band value.
std::vector<double> pss_scan(std::span<const double> spectrum, std::size_t pieces);
std::vector<double> pss_unscan(std::span<const double> matrix, std::size_t pieces, std::size_t bands);
// Flat source index for every cell of the scanned matrix.
std::vector<std::size_t> pss_index(std::size_t bands, std::size_t pieces);
Tensor pss_scan(Graph& g, const Tensor& spectrum, std::size_t pieces);

// sigmoid(pointwise(depthwise(patch))), [L, P, P]
Tensor gssm_mask(Graph& g, const Tensor& patch, const GssmWeights& w);
// Spatial contraction of the mask against the patch, [L].
Tensor gssm_merge(Graph& g, const Tensor& patch, const GssmWeights& w);

Tensor mamba_block(Graph& g, const Tensor& seq, const MambaBlockWeights& w);

// Input is a spectrum [L] (pixelwise) or a patch [L, P, P] (patchwise).
// Returns logits [K].
Tensor forward(Graph& g, const Tensor& input, const ModelWeights& w, const ModelConfig& cfg);

// argmax, lowest index on ties
std::size_t predict(std::span<const double> logits);

}  // namespace smamba
