#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "smamba/data.hpp"
#include "smamba/metrics.hpp"
#include "smamba/model.hpp"

namespace smamba {

struct TrainConfig {
  double lr0 = 1e-3;
  double weight_decay = 0.0;
  std::size_t epochs = 500;
  std::size_t batch = 64;
  std::size_t step_epochs = 20;
  double gamma = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

// Learning-rate grid searched per dataset.
inline constexpr double kLearningRateGrid[] = {1e-4, 5e-4, 1e-3, 5e-3};

// lr0 * gamma^floor(epoch / step_epochs)
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Adam with bias correction; decoupled decay w -= lr*wd*w runs first.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double lr, double weight_decay);

struct Sample {
  Tensor input;  // [L] or [L, P, P]
  std::size_t target = 0;  // 0-based class
  std::size_t pixel = 0;   // row * W + col
};

// One sample per labeled pixel of `labels`, taken from the min-max normalized cube.
std::vector<Sample> make_samples(const data::HsiCube& cube, const data::LabelMap& labels,
                                 const ModelConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;  // sample-weighted mean over the epoch
  double lr = 0.0;
};

struct TrainResult {
  ModelWeights weights;
  std::vector<EpochLog> log;
};

// Mean cross-entropy of a batch and its gradients, in parameters() order.
double batch_loss_and_grads(const ModelConfig& cfg, const ModelWeights& w,
                            std::span<const Sample* const> batch, std::vector<Tensor>& grads);

TrainResult train(const ModelConfig& cfg, const data::HsiCube& cube, const data::LabelMap& train_labels,
                  const TrainConfig& tcfg);
TrainResult train(const ModelConfig& cfg, ModelWeights init, std::span<const Sample> samples,
                  const TrainConfig& tcfg);

// Confusion over the labeled pixels of `test_labels`, sharded across threads.
Metrics evaluate(const ModelConfig& cfg, const ModelWeights& w, const data::HsiCube& cube,
                 const data::LabelMap& test_labels, unsigned threads = 1);

// Predicted class (1..K) for every pixel of the scene.
std::vector<std::uint16_t> predict_scene(const ModelConfig& cfg, const ModelWeights& w,
                                         const data::HsiCube& cube, unsigned threads = 1);

}  // namespace smamba
