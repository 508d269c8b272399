#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "smamba/error.hpp"
#include "smamba/split.hpp"
#include "smamba/train.hpp"

namespace {

using namespace smamba;

TEST(Adam, ZeroGradientKeepsWeights) {
  Tensor w({3}, {1, -2, 3});
  const Tensor before = w;
  std::vector<Tensor*> params{&w};
  const std::vector<Tensor> grads{Tensor::zeros({3})};
  AdamState state;
  adam_step(params, grads, state, 0.1, 0.0);
  EXPECT_EQ(w.values(), before.values());
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor w = Tensor::scalar(0.0);
  std::vector<Tensor*> params{&w};
  const std::vector<Tensor> grads{Tensor::scalar(1.0)};
  AdamState state;
  adam_step(params, grads, state, 0.1, 0.0);
  // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
  EXPECT_NEAR(w.item(), -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, DecayOnlyShrinks) {
  Tensor w({2}, {2.0, -4.0});
  std::vector<Tensor*> params{&w};
  const std::vector<Tensor> grads{Tensor::zeros({2})};
  AdamState state;
  adam_step(params, grads, state, 0.01, 0.5);
  EXPECT_DOUBLE_EQ(w[0], 2.0 * (1.0 - 0.005));
  EXPECT_DOUBLE_EQ(w[1], -4.0 * (1.0 - 0.005));
}

TEST(Adam, TracksHandComputedMoments) {
  Tensor w = Tensor::scalar(1.0);
  std::vector<Tensor*> params{&w};
  AdamState state;
  double m = 0, v = 0, ref = 1.0;
  const double g[] = {0.5, -1.5, 2.0};
  for (int t = 1; t <= 3; ++t) {
    const std::vector<Tensor> grads{Tensor::scalar(g[t - 1])};
    adam_step(params, grads, state, 0.05, 0.0);
    m = 0.9 * m + 0.1 * g[t - 1];
    v = 0.999 * v + 0.001 * g[t - 1] * g[t - 1];
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    ref -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(w.item(), ref, 1e-14);
  }
}

TEST(Schedule, StepDecay) {
  TrainConfig c;
  EXPECT_EQ(lr_at(0, c), c.lr0);
  EXPECT_EQ(lr_at(19, c), c.lr0);
  EXPECT_NEAR(lr_at(40, c), c.lr0 * 0.81, 1e-18);
  std::set<double> distinct;
  double previous = lr_at(0, c);
  for (std::size_t e = 0; e < 500; ++e) {
    const double lr = lr_at(e, c);
    EXPECT_LE(lr, previous);
    previous = lr;
    distinct.insert(lr);
  }
  EXPECT_EQ(distinct.size(), 25u);
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.gamma = 0.9;
  c.batch = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

struct Fixture {
  data::SynthScene scene;
  data::Split split;
};

Fixture two_class_scene() {
  data::SynthOptions o;
  o.height = 16;
  o.width = 16;
  o.bands = 16;
  o.classes = 2;
  o.noise_sigma = 0.02;
  o.seed = 7;
  Fixture f{data::synth_scene(o), {}};
  data::SplitSpec spec;
  spec.budget = 10;
  f.split = data::make_split(f.scene.labels, data::slic_segment(f.scene.cube, spec), spec);
  return f;
}

ModelConfig small_model(std::size_t bands, std::size_t classes, Variant v) {
  ModelConfig c;
  c.bands = bands;
  c.pieces = 4;
  c.state = 4;
  c.expand = 2;
  c.classes = classes;
  c.variant = v;
  return c;
}

TEST(Train, LossDecreasesOnSeparableClasses) {
  const auto f = two_class_scene();
  const auto cfg = small_model(16, 2, Variant::kPixelwise);
  TrainConfig t;
  t.epochs = 50;
  t.batch = 8;
  t.lr0 = 5e-3;
  const auto r = train(cfg, f.scene.cube, f.split.train, t);
  ASSERT_EQ(r.log.size(), 50u);
  for (const auto& e : r.log) EXPECT_TRUE(std::isfinite(e.loss));
  EXPECT_LT(r.log.back().loss, 0.5 * r.log.front().loss);
  EXPECT_EQ(r.log[0].epoch, 0u);
  EXPECT_EQ(r.log.back().epoch, 49u);
  EXPECT_EQ(r.log[0].lr, t.lr0);
}

TEST(Train, SameSeedSameWeights) {
  const auto f = two_class_scene();
  const auto cfg = small_model(16, 2, Variant::kPatchwise);
  TrainConfig t;
  t.epochs = 3;
  t.batch = 6;
  const auto a = train(cfg, f.scene.cube, f.split.train, t);
  const auto b = train(cfg, f.scene.cube, f.split.train, t);
  const auto pa = a.weights.parameters();
  const auto pb = b.weights.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].second->values(), pb[i].second->values());
  t.seed = 1;
  const auto c = train(cfg, f.scene.cube, f.split.train, t);
  EXPECT_NE(c.weights.parameters()[0].second->values(), pa[0].second->values());
}

TEST(Train, EmptyTrainingSetIsContractError) {
  const auto f = two_class_scene();
  data::LabelMap empty{16, 16, std::vector<std::uint16_t>(256, 0)};
  TrainConfig t;
  t.epochs = 1;
  EXPECT_THROW(train(small_model(16, 2, Variant::kPixelwise), f.scene.cube, empty, t), ContractError);
}

TEST(Evaluate, IndependentOfSharding) {
  const auto f = two_class_scene();
  const auto cfg = small_model(16, 2, Variant::kPatchwise);
  const auto w = init_weights(cfg, 3);
  const auto one = evaluate(cfg, w, f.scene.cube, f.split.test, 1);
  const auto three = evaluate(cfg, w, f.scene.cube, f.split.test, 3);
  EXPECT_EQ(one.confusion, three.confusion);
  EXPECT_EQ(one.confusion.total(), f.split.test.labeled());
  const auto map = predict_scene(cfg, w, f.scene.cube, 2);
  EXPECT_EQ(map.size(), 256u);
  for (auto k : map) {
    EXPECT_GE(k, 1);
    EXPECT_LE(k, 2);
  }
}

TEST(Evaluate, RejectsMismatchedScene) {
  const auto f = two_class_scene();
  const auto cfg = small_model(12, 2, Variant::kPixelwise);
  EXPECT_THROW(evaluate(cfg, init_weights(cfg, 0), f.scene.cube, f.split.test), ContractError);
}

}  // namespace
