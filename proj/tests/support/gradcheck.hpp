#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "smamba/model.hpp"
#include "smamba/ops.hpp"
#include "smamba/tensor.hpp"

namespace smamba::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;

using LossFn = std::function<Tensor(Graph&, const std::vector<Tensor>&)>;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

// Contracts an arbitrary output with fixed random weights so every output
// element contributes a distinct amount to the scalar loss.
inline Tensor weighted_sum(Graph& g, const Tensor& out, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  const Tensor r = random_tensor(out.shape(), rng, 0.5, 1.5);
  return ops::sum(g, ops::mul(g, out, r));
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t input = 0;
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central differences against reverse-mode gradients for every element of
// every input. Relative error is |a - n| / max(|a|, 1e-8).
inline GradCheck check_gradients(const LossFn& f, const std::vector<Tensor>& inputs, double h = kFdStep) {
  Graph g;
  std::vector<Tensor> tracked;
  for (const auto& t : inputs) {
    Tensor leaf = t;
    leaf.set_requires_grad(true);
    tracked.push_back(g.track(leaf));
  }
  g.backward(f(g, tracked));

  GradCheck worst;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor analytic = g.grad(tracked[i]);
    for (std::size_t e = 0; e < inputs[i].numel(); ++e) {
      auto eval = [&](double delta) {
        std::vector<Tensor> xs(inputs);
        xs[i].mutable_data()[e] += delta;
        Graph plain;
        return f(plain, xs).item();
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      const double a = analytic[e];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a), 1e-8);
      if (rel > worst.max_rel) worst = {rel, i, e, a, numeric};
    }
  }
  return worst;
}

// Random weights in a well-conditioned regime: moderate step sizes and decay
// rates, unsaturated gates, so every gradient sits well above the
// finite-difference rounding floor.
inline ModelWeights random_weights(const ModelConfig& cfg, std::uint64_t seed) {
  ModelWeights w = init_weights(cfg, seed);
  std::mt19937_64 rng(seed);
  for (auto& p : w.parameters()) {
    const auto ends_with = [&](const std::string& suffix) {
      return p.name.size() >= suffix.size() && p.name.compare(p.name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    double lo = -0.5, hi = 0.5;
    if (ends_with("b_delta")) {
      lo = -1.0;
      hi = 0.0;
    } else if (ends_with("gamma")) {
      lo = 0.5;
      hi = 1.5;
    }
    *p.tensor = random_tensor(p.tensor->shape(), rng, lo, hi);
  }
  return w;
}

// Gradient check of a model's weighted logits with respect to every weight.
inline GradCheck check_model_gradients(const ModelConfig& cfg, const ModelWeights& base, const Tensor& input) {
  std::vector<Tensor> values;
  for (const auto& [name, t] : base.parameters()) values.push_back(*t);
  const LossFn f = [&](Graph& g, const std::vector<Tensor>& ts) {
    ModelWeights w = base;
    auto params = w.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = ts[i];
    return weighted_sum(g, forward(g, input, w, cfg));
  };
  return check_gradients(f, values);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("smamba_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace smamba::testing
