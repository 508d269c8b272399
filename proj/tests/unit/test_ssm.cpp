#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "smamba/error.hpp"
#include "smamba/ssm.hpp"

namespace {

using namespace smamba;
using smamba::testing::random_tensor;

ssm::LtiSsm scalar_ssm(double a, double b, double delta) { return {{a}, {b}, {1.0}, delta, 0.0}; }

TEST(Discretize, ZohWorkedExamples) {
  const auto limit = ssm::discretize_zoh(scalar_ssm(0.0, 2.0, 0.7));
  EXPECT_EQ(limit.ssm.a_bar[0], 1.0);
  EXPECT_NEAR(limit.ssm.b_bar[0], 1.4, 1e-15);
  EXPECT_EQ(limit.limit_entries, (std::vector<std::size_t>{0}));

  EXPECT_NEAR(ssm::discretize_zoh(scalar_ssm(-1.0, 1.0, std::log(2.0))).ssm.a_bar[0], 0.5, 1e-15);

  const auto one = ssm::discretize_zoh(scalar_ssm(-1.0, 1.0, 1.0));
  EXPECT_NEAR(one.ssm.b_bar[0], 1.0 - std::exp(-1.0), 1e-12);
  EXPECT_TRUE(one.limit_entries.empty());
}

TEST(Discretize, TaylorWorkedExamples) {
  EXPECT_EQ(ssm::discretize_taylor(scalar_ssm(-1.0, 2.0, 0.5)).b_bar[0], 1.0);
  EXPECT_EQ(ssm::discretize_taylor(scalar_ssm(0.0, 1.0, 3.3)).a_bar[0], 1.0);
  const auto d = ssm::discretize_taylor(scalar_ssm(-2.0, 3.0, 0.1));
  EXPECT_NEAR(d.a_bar[0], std::exp(-0.2), 1e-15);
  EXPECT_NEAR(d.b_bar[0], 0.3, 1e-15);
}

TEST(Discretize, TaylorApproachesZohForSmallSteps) {
  double previous = 1.0;
  for (double delta : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const double zoh = ssm::discretize_zoh(scalar_ssm(-1.0, 1.0, delta)).ssm.b_bar[0];
    const double taylor = ssm::discretize_taylor(scalar_ssm(-1.0, 1.0, delta)).b_bar[0];
    const double gap = std::abs(zoh - taylor) / std::abs(zoh);
    EXPECT_LT(gap, previous);
    previous = gap;
  }
  EXPECT_LT(previous, 1e-4);
}

TEST(Discretize, RejectsBadStep) {
  EXPECT_THROW(ssm::discretize_zoh(scalar_ssm(-1.0, 1.0, 0.0)), ConfigError);
  EXPECT_THROW(ssm::discretize_taylor({{-1.0}, {1.0, 2.0}, {1.0}, 1.0, 0.0}), DimensionError);
}

TEST(RecurrentScan, WorkedExamples) {
  const ssm::DiscreteSsm d{{0.5}, {1.0}, {1.0}};
  const std::vector<double> impulse{1, 0, 0};
  EXPECT_EQ(ssm::recurrent_scan(d, impulse), (std::vector<double>{1, 0.5, 0.25}));
  const std::vector<double> x{3, -1, 2};
  EXPECT_EQ(ssm::recurrent_scan({{0.9}, {0.0}, {1.0}}, x), (std::vector<double>{0, 0, 0}));
  const std::vector<double> y{3, 4};
  EXPECT_EQ(ssm::recurrent_scan({{0.0}, {1.0}, {2.0}}, y), (std::vector<double>{6, 8}));
  const std::vector<double> h0{2.0};
  EXPECT_EQ(ssm::recurrent_scan(d, impulse, h0), (std::vector<double>{2, 1, 0.5}));
}

TEST(ConvKernel, WorkedExamples) {
  EXPECT_EQ(ssm::ssm_conv_kernel({{0.5}, {1.0}, {1.0}}, 3), (std::vector<double>{1, 0.5, 0.25}));
  EXPECT_EQ(ssm::ssm_conv_kernel({{0.0, 0.0}, {2.0, 1.0}, {3.0, 4.0}}, 3), (std::vector<double>{10, 0, 0}));
  EXPECT_EQ(ssm::ssm_conv_kernel({{0.3}, {2.0}, {3.0}}, 1), (std::vector<double>{6}));
}

TEST(ConvScan, WorkedExamples) {
  const std::vector<double> x{1, -2, 3, 4};
  const std::vector<double> delta{1, 0, 0, 0};
  EXPECT_EQ(ssm::conv_scan(x, delta), x);
  const std::vector<double> impulse{1, 0, 0};
  const std::vector<double> k{1, 0.5, 0.25};
  EXPECT_EQ(ssm::conv_scan(impulse, k), k);
  const std::vector<double> zeros(3, 0.0);
  EXPECT_EQ(ssm::conv_scan(zeros, k), zeros);
  EXPECT_THROW(ssm::conv_scan(x, k), DimensionError);
}

TEST(ConvScan, DualityWithRecurrence) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> a(-3.0, -0.1), u(-1.0, 1.0), dt(0.01, 1.0);
  std::uniform_int_distribution<std::size_t> n_dist(1, 8), l_dist(1, 64);
  for (int trial = 0; trial < 50; ++trial) {
    ssm::LtiSsm s;
    const std::size_t n = n_dist(rng);
    for (std::size_t i = 0; i < n; ++i) {
      s.a.push_back(a(rng));
      s.b.push_back(u(rng));
      s.c.push_back(u(rng));
    }
    s.delta = dt(rng);
    EXPECT_TRUE(ssm::is_stable(s));
    const auto d = ssm::discretize_zoh(s).ssm;
    std::vector<double> x(l_dist(rng));
    for (auto& v : x) v = u(rng);
    const auto rec = ssm::recurrent_scan(d, x);
    const auto conv = ssm::conv_scan(x, ssm::ssm_conv_kernel(d, x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(rec[i], conv[i], 1e-10);
  }
}

ssm::SelectiveSsmParams lti_params(std::size_t inner, std::size_t state, std::mt19937_64& rng) {
  auto p = ssm::init_selective(inner, state, rng);
  p.w_delta = Tensor::zeros({inner, inner});
  p.w_b = Tensor::zeros({inner, state});
  p.w_c = Tensor::zeros({inner, state});
  p.b_b = random_tensor({state}, rng, -1.0, 1.0);
  p.b_c = random_tensor({state}, rng, -1.0, 1.0);
  p.b_delta = random_tensor({inner}, rng, -3.0, 0.5);
  p.skip_d = random_tensor({inner}, rng, -1.0, 1.0);
  return p;
}

TEST(SelectiveScan, ZeroInputCouplingGivesZero) {
  std::mt19937_64 rng(12);
  auto p = ssm::init_selective(3, 4, rng);
  p.w_b = Tensor::zeros({3, 4});
  p.skip_d = Tensor::zeros({3});
  Graph g;
  const Tensor result = ssm::selective_scan(g, random_tensor({5, 3}, rng), p);
  for (double v : result.data()) EXPECT_EQ(v, 0.0);
}

TEST(SelectiveScan, TwoStepHandUnroll) {
  ssm::SelectiveSsmParams p;
  p.a_log = Tensor::zeros({1, 1});
  p.w_delta = Tensor::zeros({1, 1});
  p.b_delta = Tensor::zeros({1});  // softplus(0) = ln 2
  p.w_b = Tensor::zeros({1, 1});
  p.b_b = Tensor({1}, {1.0});
  p.w_c = Tensor::zeros({1, 1});
  p.b_c = Tensor({1}, {1.0});
  p.skip_d = Tensor::zeros({1});
  Graph g;
  const Tensor y = ssm::selective_scan(g, Tensor({2, 1}, {1.0, 1.0}), p);
  const double ln2 = std::log(2.0);
  EXPECT_NEAR(y[0], ln2, 1e-12);
  EXPECT_NEAR(y[1], ln2 * (0.5 + 1.0), 1e-12);
}

TEST(SelectiveScan, ReducesToTimeInvariantScan) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t inner = 1 + trial % 4, state = 1 + trial % 5, len = 3 + trial;
    const auto p = lti_params(inner, state, rng);
    const Tensor x = random_tensor({len, inner}, rng);
    Graph g;
    const Tensor y = ssm::selective_scan(g, x, p);
    for (std::size_t d = 0; d < inner; ++d) {
      ssm::DiscreteSsm lti;
      const double delta = ops::softplus(p.b_delta[d]);
      for (std::size_t n = 0; n < state; ++n) {
        lti.a_bar.push_back(std::exp(-delta * std::exp(p.a_log.at(d, n))));
        lti.b_bar.push_back(delta * p.b_b[n]);
        lti.c.push_back(p.b_c[n]);
      }
      std::vector<double> xd(len);
      for (std::size_t t = 0; t < len; ++t) xd[t] = x.at(t, d);
      const auto ref = ssm::recurrent_scan(lti, xd);
      for (std::size_t t = 0; t < len; ++t) EXPECT_NEAR(y.at(t, d), ref[t] + p.skip_d[d] * xd[t], 1e-12);
    }
  }
}

TEST(SelectiveScan, ChunkedStateIsExact) {
  std::mt19937_64 rng(14);
  const auto p = ssm::init_selective(3, 4, rng);
  const std::size_t len = 32;
  const Tensor x = random_tensor({len, 3}, rng);
  Graph g;
  const Tensor full = ssm::selective_scan(g, x, p);
  EXPECT_EQ(ssm::selective_scan_chunk(x, p).y.values(), full.values());
  for (std::size_t m = 1; m < len; ++m) {
    const auto& xs = x.values();
    const Tensor head({m, 3}, std::vector<double>(xs.begin(), xs.begin() + m * 3));
    const Tensor tail({len - m, 3}, std::vector<double>(xs.begin() + m * 3, xs.end()));
    const auto first = ssm::selective_scan_chunk(head, p);
    const auto second = ssm::selective_scan_chunk(tail, p, first.h_last);
    std::vector<double> joined = first.y.values();
    joined.insert(joined.end(), second.y.values().begin(), second.y.values().end());
    EXPECT_EQ(joined, full.values()) << "split at " << m;
  }
}

TEST(SelectiveScan, RealizedTransitionsAreStable) {
  std::mt19937_64 rng(15);
  auto p = ssm::init_selective(4, 6, rng);
  p.a_log = random_tensor({4, 6}, rng, -3.0, 3.0);
  const Tensor x = random_tensor({20, 4}, rng, -5.0, 5.0);
  for (double a : ssm::realized_a_bar(x, p)) {
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
  }
}

TEST(SelectiveScan, InitFollowsRamp) {
  std::mt19937_64 rng(16);
  const auto p = ssm::init_selective(5, 4, rng);
  for (std::size_t d = 0; d < 5; ++d) {
    EXPECT_GE(ops::softplus(p.b_delta[d]), 1e-3 * (1 - 1e-12));
    EXPECT_LE(ops::softplus(p.b_delta[d]), 1e-1 * (1 + 1e-12));
    EXPECT_EQ(p.skip_d[d], 1.0);
    for (std::size_t n = 0; n < 4; ++n) EXPECT_NEAR(p.a_log.at(d, n), std::log(n + 1.0), 1e-15);
  }
  const double bound = 1.0 / std::sqrt(5.0);
  for (double w : p.w_delta.data()) EXPECT_LE(std::abs(w), bound);
}

TEST(SelectiveScan, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  const std::size_t len = 6, inner = 2, state = 3;
  const auto base = ssm::init_selective(inner, state, rng);
  std::vector<Tensor> inputs{random_tensor({len, inner}, rng),
                             random_tensor({inner, state}, rng, -0.5, 1.0),
                             random_tensor({inner, inner}, rng),
                             random_tensor({inner}, rng),
                             random_tensor({inner, state}, rng),
                             random_tensor({state}, rng),
                             random_tensor({inner, state}, rng),
                             random_tensor({state}, rng),
                             random_tensor({inner}, rng)};
  const smamba::testing::LossFn f = [&](Graph& g, const std::vector<Tensor>& t) {
    ssm::SelectiveSsmParams p{t[1], t[2], t[3], t[4], t[5], t[6], t[7], t[8]};
    return smamba::testing::weighted_sum(g, ssm::selective_scan(g, t[0], p));
  };
  const auto r = smamba::testing::check_gradients(f, inputs);
  EXPECT_LT(r.max_rel, smamba::testing::kFdTolerance)
      << "input " << r.input << " element " << r.element << " analytic " << r.analytic << " numeric " << r.numeric;
}

}  // namespace
