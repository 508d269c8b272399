#include "smamba/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "smamba/error.hpp"
#include "smamba/ops.hpp"

namespace smamba {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train: lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("train: weight decay must be >= 0");
  if (epochs == 0 || batch == 0 || step_epochs == 0) {
    throw ConfigError("train: epochs, batch and step must be >= 1");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train: gamma must lie in (0, 1]");
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.gamma, static_cast<double>(epoch / cfg.step_epochs));
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double lr, double weight_decay) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->numel(), 0.0);
      state.v.emplace_back(p->numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam: state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || state.m[i].size() != params[i]->numel()) {
      throw DimensionError("adam: shape mismatch for parameter " + std::to_string(i));
    }
    auto w = params[i]->mutable_data();
    const auto g = grads[i].data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      w[j] -= lr * weight_decay * w[j];
      m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
      v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
  }
}

std::vector<Sample> make_samples(const data::HsiCube& raw, const data::LabelMap& labels,
                                 const ModelConfig& cfg) {
  if (labels.height != raw.height || labels.width != raw.width) {
    throw DimensionError("labels " + std::to_string(labels.height) + "x" + std::to_string(labels.width) +
                         " do not match cube " + std::to_string(raw.height) + "x" +
                         std::to_string(raw.width));
  }
  if (raw.bands != cfg.bands) {
    throw ContractError("cube has " + std::to_string(raw.bands) + " bands, model expects " +
                        std::to_string(cfg.bands));
  }
  const data::HsiCube cube = data::normalize(raw);
  std::vector<Sample> samples;
  for (std::size_t r = 0; r < cube.height; ++r) {
    for (std::size_t c = 0; c < cube.width; ++c) {
      const auto v = labels.at(r, c);
      if (v == 0) continue;
      if (v > cfg.classes) {
        throw ContractError("label " + std::to_string(v) + " exceeds model classes " +
                            std::to_string(cfg.classes));
      }
      Sample s;
      s.target = v - 1u;
      s.pixel = r * cube.width + c;
      if (cfg.variant == Variant::kPatchwise) {
        s.input = data::extract_patch(cube, r, c, cfg.patch);
      } else {
        s.input = Tensor({cube.bands}, cube.spectrum(r, c));
      }
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

double batch_loss_and_grads(const ModelConfig& cfg, const ModelWeights& w,
                            std::span<const Sample* const> batch, std::vector<Tensor>& grads) {
  Graph g;
  const ModelWeights tracked = track(g, w);
  std::vector<Tensor> rows;
  std::vector<std::size_t> targets;
  rows.reserve(batch.size());
  for (const Sample* s : batch) {
    rows.push_back(forward(g, s->input, tracked, cfg));
    targets.push_back(s->target);
  }
  const Tensor logits = ops::concat_rows(g, rows);
  const Tensor loss = ops::softmax_cross_entropy(g, logits, targets);
  g.backward(loss);
  grads.clear();
  for (const auto& [name, t] : tracked.parameters()) grads.push_back(g.grad(*t));
  return loss.item();
}

TrainResult train(const ModelConfig& cfg, ModelWeights init, std::span<const Sample> samples,
                  const TrainConfig& tcfg) {
  cfg.validate();
  tcfg.validate();
  if (samples.empty()) throw ContractError("train: empty training set");
  check_weights(cfg, init);

  TrainResult result{std::move(init), {}};
  std::vector<Tensor*> params;
  for (auto& p : result.weights.parameters()) params.push_back(p.tensor);

  std::mt19937_64 rng(tcfg.seed ^ 0x5eed5eed5eed5eedULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  AdamState adam;
  std::vector<Tensor> grads;
  std::vector<const Sample*> batch;
  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, tcfg);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch) {
      const std::size_t end = std::min(order.size(), start + tcfg.batch);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[order[i]]);
      const double loss = batch_loss_and_grads(cfg, result.weights, batch, grads);
      loss_sum += loss * static_cast<double>(batch.size());
      adam_step(params, grads, adam, lr, tcfg.weight_decay);
    }
    const double mean = loss_sum / static_cast<double>(samples.size());
    if (!std::isfinite(mean)) throw NumericError("train: loss diverged at epoch " + std::to_string(epoch));
    result.log.push_back({epoch, mean, lr});
  }
  return result;
}

TrainResult train(const ModelConfig& cfg, const data::HsiCube& cube, const data::LabelMap& train_labels,
                  const TrainConfig& tcfg) {
  const auto samples = make_samples(cube, train_labels, cfg);
  return train(cfg, init_weights(cfg, tcfg.seed), samples, tcfg);
}

namespace {

// Applies fn(begin, end, shard) over contiguous shards of [0, n).
template <typename Fn>
void run_sharded(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    fn(0, n, 0u);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(n, t * chunk), end = std::min(n, begin + chunk);
    pool.emplace_back([&, begin, end, t] { fn(begin, end, t); });
  }
  for (auto& th : pool) th.join();
}

std::size_t predict_one(const ModelConfig& cfg, const ModelWeights& w, const Tensor& input) {
  Graph g;  // nothing is tracked, so nothing is recorded
  return predict(forward(g, input, w, cfg).data());
}

}  // namespace

Metrics evaluate(const ModelConfig& cfg, const ModelWeights& w, const data::HsiCube& cube,
                 const data::LabelMap& test_labels, unsigned threads) {
  cfg.validate();
  check_weights(cfg, w);
  const auto samples = make_samples(cube, test_labels, cfg);
  if (samples.empty()) throw ContractError("evaluate: empty test set");
  std::vector<ConfusionMatrix> shards(std::max(1u, threads), ConfusionMatrix(cfg.classes));
  run_sharded(samples.size(), threads, [&](std::size_t begin, std::size_t end, unsigned shard) {
    for (std::size_t i = begin; i < end; ++i) {
      shards[shard].add(samples[i].target, predict_one(cfg, w, samples[i].input));
    }
  });
  ConfusionMatrix cm(cfg.classes);
  for (const auto& s : shards) cm.merge(s);
  return compute_metrics(cm);
}

std::vector<std::uint16_t> predict_scene(const ModelConfig& cfg, const ModelWeights& w,
                                         const data::HsiCube& raw, unsigned threads) {
  cfg.validate();
  check_weights(cfg, w);
  if (raw.bands != cfg.bands) throw ContractError("predict_scene: band count mismatch");
  const data::HsiCube cube = data::normalize(raw);
  std::vector<std::uint16_t> out(cube.pixels(), 0);
  run_sharded(cube.pixels(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t p = begin; p < end; ++p) {
      const std::size_t r = p / cube.width, c = p % cube.width;
      const Tensor input = cfg.variant == Variant::kPatchwise
                               ? data::extract_patch(cube, r, c, cfg.patch)
                               : Tensor({cube.bands}, cube.spectrum(r, c));
      out[p] = static_cast<std::uint16_t>(predict_one(cfg, w, input) + 1);
    }
  });
  return out;
}

}  // namespace smamba
