#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "smamba/tensor.hpp"

namespace smamba::ssm {

// Single-input single-output continuous system with diagonal state matrix.
struct LtiSsm {
  std::vector<double> a;  // diagonal of A
  std::vector<double> b;
  std::vector<double> c;
  double delta = 1.0;
  double skip_d = 0.0;

  std::size_t state_size() const { return a.size(); }
};

struct DiscreteSsm {
  std::vector<double> a_bar;
  std::vector<double> b_bar;
  std::vector<double> c;
};

struct ZohDiscretization {
  DiscreteSsm ssm;
  // State indices with A[n] == 0, where the Taylor limit replaced the exact rule.
  std::vector<std::size_t> limit_entries;
};

void validate(const LtiSsm& ssm);
bool is_stable(const LtiSsm& ssm);

// Abar = exp(dA), Bbar = (dA)^-1 (Abar - 1) dB.
ZohDiscretization discretize_zoh(const LtiSsm& ssm);
// Abar = exp(dA), Bbar = dB.
DiscreteSsm discretize_taylor(const LtiSsm& ssm);

// h_k = Abar*h_{k-1} + Bbar*x_k, y_k = <C, h_k>. Empty h0 means zeros.
std::vector<double> recurrent_scan(const DiscreteSsm& d, std::span<const double> x,
                                   std::span<const double> h0 = {});

// K[j] = <C, Abar^j * Bbar>, j = 0..length-1.
std::vector<double> ssm_conv_kernel(const DiscreteSsm& d, std::size_t length);

// Causal convolution y_k = sum_{j<=k} K[j] x_{k-j}.
std::vector<double> conv_scan(std::span<const double> x, std::span<const double> kernel);

// Input-dependent (S6) parameters for `inner` channels sharing a state of
// size `state` per channel. Projections follow the row-vector convention
// x_t · W.
struct SelectiveSsmParams {
  Tensor a_log;    // [inner, state]; A = -exp(a_log)
  Tensor w_delta;  // [inner, inner]
  Tensor b_delta;  // [inner]
  Tensor w_b;      // [inner, state]
  Tensor b_b;      // [state]
  Tensor w_c;      // [inner, state]
  Tensor b_c;      // [state]
  Tensor skip_d;   // [inner]

  std::size_t inner() const { return a_log.dim(0); }
  std::size_t state() const { return a_log.dim(1); }
  void validate() const;
};

SelectiveSsmParams init_selective(std::size_t inner, std::size_t state, std::mt19937_64& rng);

// Differentiable selective scan over x[L, inner] from a zero state.
Tensor selective_scan(Graph& g, const Tensor& x, const SelectiveSsmParams& p);

struct ScanChunk {
  Tensor y;
  std::vector<double> h_last;  // [inner * state]
};

// Forward-only scan seeded with h0 (empty = zeros); returns the final state so
// a sequence can be processed in consecutive chunks.
ScanChunk selective_scan_chunk(const Tensor& x, const SelectiveSsmParams& p,
                               std::span<const double> h0 = {});

// Realized discrete transition exp(delta_t * A) for every step, [L, inner, state].
std::vector<double> realized_a_bar(const Tensor& x, const SelectiveSsmParams& p);

}  // namespace smamba::ssm
