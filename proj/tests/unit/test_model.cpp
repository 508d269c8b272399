#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "smamba/cost.hpp"
#include "smamba/error.hpp"
#include "smamba/model.hpp"

namespace {

using namespace smamba;
using smamba::testing::random_tensor;

std::vector<double> iota(std::size_t n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

ModelConfig tiny(Variant v) {
  ModelConfig c;
  c.bands = 12;
  c.pieces = 3;
  c.state = 4;
  c.expand = 2;
  c.classes = 3;
  c.patch = 3;
  c.variant = v;
  return c;
}

TEST(Pss, WorkedExamples) {
  const auto six = iota(6);
  EXPECT_EQ(pss_scan(six, 3), (std::vector<double>{1, 3, 5, 2, 4, 6}));
  EXPECT_EQ(pss_scan(six, 1), six);
  const auto five = iota(5);
  const auto m = pss_scan(five, 2);
  ASSERT_EQ(m.size(), 6u);
  EXPECT_EQ((std::vector<double>{m[1], m[3], m[5]}), (std::vector<double>{4, 5, 5}));
  EXPECT_EQ(pss_unscan(pss_scan(six, 3), 3, 6), six);
  EXPECT_EQ(pss_unscan(m, 2, 5), five);
  EXPECT_EQ(pss_unscan(pss_scan(five, 1), 1, 5), five);
  EXPECT_THROW(pss_scan(five, 6), ConfigError);
  EXPECT_THROW(pss_scan(five, 0), ConfigError);
}

TEST(Pss, RoundTripAllShapes) {
  std::mt19937_64 rng(21);
  for (std::size_t l = 4; l <= 96; ++l) {
    const Tensor x = random_tensor({l}, rng);
    for (std::size_t r = 1; r <= l; ++r) ASSERT_EQ(pss_unscan(pss_scan(x.data(), r), r, l), x.values());
  }
}

TEST(Pss, GraphVersionMatchesPlain) {
  std::mt19937_64 rng(22);
  const Tensor x = random_tensor({13}, rng);
  Graph g;
  const Tensor m = pss_scan(g, x, 4);
  EXPECT_EQ(m.shape(), (Shape{4, 4}));
  EXPECT_EQ(m.values(), pss_scan(x.data(), 4));
}

TEST(ModelConfig, PieceLengthAndValidation) {
  ModelConfig c;
  c.bands = 144;
  c.pieces = 6;
  c.classes = 15;
  EXPECT_EQ(c.piece_len(), 24u);
  EXPECT_NO_THROW(c.validate());
  c.pieces = 145;
  EXPECT_THROW(c.validate(), ConfigError);
  c.pieces = 6;
  c.patch = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c.variant = Variant::kPixelwise;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(parse_variant("pixelwise"), Variant::kPixelwise);
  EXPECT_THROW(parse_variant("voxelwise"), ConfigError);
}

GssmWeights zero_gssm(std::size_t l) {
  return {Tensor::zeros({l, 3, 3}), Tensor::zeros({l}), Tensor::zeros({l, l}), Tensor::zeros({l})};
}

TEST(Gssm, ZeroWeightsGiveHalfMask) {
  std::mt19937_64 rng(23);
  const Tensor patch = random_tensor({5, 3, 3}, rng);
  Graph g;
  const Tensor result = gssm_mask(g, patch, zero_gssm(5));
  for (double v : result.data()) EXPECT_EQ(v, 0.5);
  const Tensor out = gssm_merge(g, patch, zero_gssm(5));
  for (std::size_t l = 0; l < 5; ++l) {
    double s = 0.0;
    for (std::size_t p = 0; p < 9; ++p) s += patch[l * 9 + p];
    EXPECT_NEAR(out[l], 0.5 * s, 1e-12);
  }
}

TEST(Gssm, DeltaKernelIdentityPointwise) {
  GssmWeights w = zero_gssm(1);
  w.dw_kernel.mutable_data()[4] = 1.0;
  w.pw_weight = Tensor({1, 1}, {1.0});
  Graph g;
  const double expected = 9.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(gssm_merge(g, Tensor::filled({1, 3, 3}, 1.0), w).item(), expected, 1e-12);
  EXPECT_NEAR(expected, 6.5796, 1e-4);
}

TEST(Gssm, SinglePixelIsElementwiseGate) {
  std::mt19937_64 rng(24);
  const std::size_t l = 6;
  const GssmWeights w{random_tensor({l, 3, 3}, rng), random_tensor({l}, rng), random_tensor({l, l}, rng),
                      random_tensor({l}, rng)};
  const Tensor patch = random_tensor({l, 1, 1}, rng);
  Graph g;
  const Tensor mask = gssm_mask(g, patch, w);
  const Tensor out = gssm_merge(g, patch, w);
  for (std::size_t i = 0; i < l; ++i) {
    EXPECT_EQ(out[i], mask[i] * patch[i]);
    double pre = w.pw_bias[i];
    for (std::size_t c = 0; c < l; ++c) pre += (w.dw_kernel.at(c, 1, 1) * patch[c] + w.dw_bias[c]) * w.pw_weight.at(c, i);
    EXPECT_NEAR(mask[i], 1.0 / (1.0 + std::exp(-pre)), 1e-12);
  }
}

TEST(Gssm, MaskBoundsAndMergeBound) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t l = 4;
    const GssmWeights w{random_tensor({l, 3, 3}, rng), random_tensor({l}, rng), random_tensor({l, l}, rng),
                        random_tensor({l}, rng)};
    const Tensor patch = random_tensor({l, 3, 3}, rng);
    Graph g;
    const Tensor result = gssm_mask(g, patch, w);
    for (double m : result.data()) {
      EXPECT_GT(m, 0.0);
      EXPECT_LT(m, 1.0);
    }
    double peak = 0.0;
    for (double v : patch.data()) peak = std::max(peak, std::abs(v));
    const Tensor merged = gssm_merge(g, patch, w);
    for (double v : merged.data()) EXPECT_LE(std::abs(v), 9.0 * peak);
  }
}

MambaBlockWeights zero_block(std::size_t r, std::size_t e, std::size_t n) {
  const std::size_t d = r * e;
  MambaBlockWeights b;
  b.ln_in = {Tensor::zeros({r}), Tensor::zeros({r})};
  b.expand = {Tensor::zeros({r, d}), Tensor::zeros({d})};
  b.keep = {Tensor::zeros({d, d}), Tensor::zeros({d})};
  b.ssm = {Tensor::zeros({d, n}), Tensor::zeros({d, d}), Tensor::zeros({d}), Tensor::zeros({d, n}),
           Tensor::zeros({n}),    Tensor::zeros({d, n}), Tensor::zeros({n}), Tensor::zeros({d})};
  b.ln_state = {Tensor::zeros({d}), Tensor::zeros({d})};
  b.compress = {Tensor::zeros({d, r}), Tensor::zeros({r})};
  b.gate = {Tensor::zeros({r, r}), Tensor::zeros({r})};
  return b;
}

TEST(MambaBlock, ZeroWeightsAreIdentity) {
  std::mt19937_64 rng(26);
  const Tensor seq = random_tensor({5, 3}, rng);
  Graph g;
  EXPECT_EQ(mamba_block(g, seq, zero_block(3, 4, 2)).values(), seq.values());
}

TEST(MambaBlock, PreservesShape) {
  std::mt19937_64 rng(27);
  for (std::size_t e : {2u, 8u}) {
    for (std::size_t r = 1; r <= 4; ++r) {
      ModelConfig c;
      c.bands = 8 * r;
      c.pieces = r;
      c.expand = e;
      c.state = 3;
      c.variant = Variant::kPixelwise;
      const ModelWeights w = init_weights(c, 1);
      const Tensor seq = random_tensor({c.piece_len(), r}, rng);
      Graph g;
      EXPECT_EQ(mamba_block(g, seq, w.blocks.at(0)).shape(), seq.shape());
    }
  }
}

TEST(MambaBlock, GradientsMatchFiniteDifferences) {
  ModelConfig c;
  c.bands = 8;
  c.pieces = 2;
  c.expand = 2;
  c.state = 3;
  c.variant = Variant::kPixelwise;
  const ModelWeights w = smamba::testing::random_weights(c, 3);
  std::mt19937_64 rng(28);
  const Tensor seq = random_tensor({4, 2}, rng);
  std::vector<Tensor> values{seq};
  for (const auto& [name, t] : const_cast<const ModelWeights&>(w).parameters()) {
    if (name.rfind("block0.", 0) == 0) values.push_back(*t);
  }
  const smamba::testing::LossFn f = [&](Graph& g, const std::vector<Tensor>& t) {
    ModelWeights copy = w;
    std::size_t i = 1;
    for (auto& p : copy.parameters()) {
      if (p.name.rfind("block0.", 0) == 0) *p.tensor = t[i++];
    }
    return smamba::testing::weighted_sum(g, mamba_block(g, t[0], copy.blocks[0]));
  };
  const auto r = smamba::testing::check_gradients(f, values);
  EXPECT_LT(r.max_rel, smamba::testing::kFdTolerance) << "input " << r.input << " element " << r.element << " analytic " << r.analytic << " numeric " << r.numeric;
}

TEST(Forward, LogitsShapeAndDeterminism) {
  std::mt19937_64 rng(29);
  for (Variant v : {Variant::kPixelwise, Variant::kPatchwise}) {
    ModelConfig c = tiny(v);
    c.classes = 5;
    const ModelWeights w = init_weights(c, 4);
    const Tensor in = v == Variant::kPixelwise ? random_tensor({12}, rng) : random_tensor({12, 3, 3}, rng);
    Graph g1, g2;
    const Tensor a = forward(g1, in, w, c);
    EXPECT_EQ(a.shape(), (Shape{5}));
    EXPECT_EQ(a.values(), forward(g2, in, w, c).values());
  }
}

TEST(Forward, VariantMismatchIsContractError) {
  const ModelConfig c = tiny(Variant::kPatchwise);
  const ModelWeights w = init_weights(c, 5);
  Graph g;
  EXPECT_THROW(forward(g, Tensor::zeros({12}), w, c), ContractError);
  const ModelConfig p = tiny(Variant::kPixelwise);
  EXPECT_THROW(forward(g, Tensor::zeros({12, 3, 3}), init_weights(p, 5), p), ContractError);
  EXPECT_THROW(forward(g, Tensor::zeros({12}), w, p), ContractError);
}

TEST(Forward, SinglePixelPatchReducesToPixelwise) {
  ModelConfig patch = tiny(Variant::kPatchwise);
  patch.patch = 1;
  ModelConfig pixel = tiny(Variant::kPixelwise);
  const ModelWeights wp = init_weights(patch, 6);
  ModelWeights wx = wp;
  wx.gssm.reset();
  std::mt19937_64 rng(30);
  const Tensor in = random_tensor({12, 1, 1}, rng);
  Graph g;
  const Tensor merged = gssm_merge(g, in, *wp.gssm);
  EXPECT_EQ(forward(g, in, wp, patch).values(), forward(g, merged, wx, pixel).values());
}

TEST(Forward, PixelwiseHasNoGssm) {
  const ModelWeights w = init_weights(tiny(Variant::kPixelwise), 7);
  EXPECT_FALSE(w.gssm.has_value());
  for (const auto& [name, t] : w.parameters()) EXPECT_EQ(name.find("gssm"), std::string::npos);
  EXPECT_TRUE(init_weights(tiny(Variant::kPatchwise), 7).gssm.has_value());
}

TEST(Forward, FullModelGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(31);
  for (Variant v : {Variant::kPixelwise, Variant::kPatchwise}) {
    const ModelConfig c = tiny(v);
    const Tensor in = v == Variant::kPixelwise ? random_tensor({12}, rng, 0.0, 1.0)
                                               : random_tensor({12, 3, 3}, rng, 0.0, 1.0);
    const auto r = smamba::testing::check_model_gradients(c, smamba::testing::random_weights(c, 8), in);
    EXPECT_LT(r.max_rel, smamba::testing::kFdTolerance)
        << variant_name(v) << " input " << r.input << " element " << r.element << " analytic " << r.analytic << " numeric " << r.numeric;
  }
}

TEST(Forward, ParamsGrowWithPieces) {
  std::uint64_t previous = 0;
  for (std::size_t r = 1; r <= 48; ++r) {
    ModelConfig c;
    c.bands = 48;
    c.pieces = r;
    c.classes = 4;
    c.variant = Variant::kPixelwise;
    try {
      c.validate();
    } catch (const ConfigError&) {
      continue;
    }
    const std::uint64_t params = count_params(init_weights(c, 0));
    EXPECT_GT(params, previous) << "R=" << r;
    previous = params;
  }
}

TEST(Predict, ArgmaxWithLowestTieBreak) {
  EXPECT_EQ(predict(std::vector<double>{0.1, 0.9}), 1u);
  EXPECT_EQ(predict(std::vector<double>{0.5, 0.5}), 0u);
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-10.0, 10.0), scale(0.1, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(6);
    for (auto& v : z) v = u(rng);
    const double c = u(rng), s = scale(rng);
    std::vector<double> shifted(z), affine(z);
    for (auto& v : shifted) v += c;
    for (auto& v : affine) v = s * v + c;
    EXPECT_EQ(predict(shifted), predict(z));
    EXPECT_EQ(predict(affine), predict(z));
  }
}

}  // namespace
