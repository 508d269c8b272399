#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smamba/tensor.hpp"

// Differentiable primitives. Each op records a backward rule on `g` when at
// least one input is tracked by it; otherwise it is a plain forward
// computation. All inputs and outputs are checked for non-finite values.
namespace smamba::ops {

enum class Activation { kSigmoid, kSilu, kSoftplus, kExp };

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kSoftplusLinearAbove = 30.0;

// Scalar helpers shared with the fused scan kernels.
double sigmoid(double x);
double softplus(double x);
double softplus_grad(double x);

// x[B,Din] · W[Din,Dout] + b[Dout]
Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b);

// Per-channel 2-D cross-correlation with zero same-padding; odd kernels only.
Tensor depthwise_conv2d(Graph& g, const Tensor& x, const Tensor& k, const Tensor& b);

// 1×1 convolution: x[Cin,H,W], W[Cin,Cout], b[Cout] -> [Cout,H,W].
Tensor pointwise_conv2d(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b);

Tensor activation(Graph& g, const Tensor& x, Activation kind);

// Normalizes over the last axis, then applies gamma/beta of that length.
Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

// Mean over the batch of -log softmax(logits)[target].
Tensor softmax_cross_entropy(Graph& g, const Tensor& logits, std::span<const std::size_t> target);

// out[l] = sum_{i,j} a[l,i,j] * b[l,i,j]
Tensor spatial_contract(Graph& g, const Tensor& a, const Tensor& b);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
Tensor sum(Graph& g, const Tensor& x);
Tensor reshape(Graph& g, const Tensor& x, Shape shape);

// out.flat[i] = x.flat[index[i]]; backward scatters additively.
Tensor gather(Graph& g, const Tensor& x, std::vector<std::size_t> index, Shape shape);

// Stacks tensors of identical shape [1,K] (or [K]) into [N,K].
Tensor concat_rows(Graph& g, std::span<const Tensor> rows);

void check_finite(std::span<const double> values, const char* where);

}  // namespace smamba::ops
