#include <gtest/gtest.h>

#include <random>

#include "smamba/error.hpp"
#include "smamba/metrics.hpp"

namespace {

using namespace smamba;

struct Recount {
  std::vector<double> ca;
  double oa = 0, aa = 0, kappa = 0;
};

// Expands the matrix into individual (truth, prediction) samples, tallies
// them again and applies the textbook formulas.
Recount brute_force(const ConfusionMatrix& cm) {
  const std::size_t k = cm.classes();
  std::vector<std::pair<std::size_t, std::size_t>> samples;
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t p = 0; p < k; ++p) {
      for (std::uint64_t n = 0; n < cm.at(t, p); ++n) samples.emplace_back(t, p);
    }
  }
  std::vector<double> row(k, 0), col(k, 0), hit(k, 0);
  double correct = 0;
  for (const auto& [t, p] : samples) {
    row[t] += 1;
    col[p] += 1;
    if (t == p) {
      hit[t] += 1;
      correct += 1;
    }
  }
  const double n = static_cast<double>(samples.size());
  Recount r;
  r.oa = correct / n;
  double present = 0, pe = 0;
  for (std::size_t c = 0; c < k; ++c) {
    r.ca.push_back(row[c] > 0 ? hit[c] / row[c] : 0.0);
    if (row[c] > 0) {
      r.aa += r.ca.back();
      present += 1;
    }
    pe += row[c] * col[c] / (n * n);
  }
  r.aa /= present;
  r.kappa = (r.oa - pe) / (1.0 - pe);
  return r;
}

TEST(Metrics, WorkedExamples) {
  const auto perfect = compute_metrics(ConfusionMatrix(2, {50, 0, 0, 50}));
  EXPECT_EQ(perfect.oa, 1.0);
  EXPECT_EQ(perfect.aa, 1.0);
  EXPECT_EQ(perfect.kappa, 1.0);
  const auto chance = compute_metrics(ConfusionMatrix(2, {25, 25, 25, 25}));
  EXPECT_EQ(chance.oa, 0.5);
  EXPECT_EQ(chance.kappa, 0.0);
  const auto hand = compute_metrics(ConfusionMatrix(2, {40, 10, 20, 30}));
  EXPECT_EQ(hand.oa, 0.7);
  EXPECT_EQ(hand.kappa, 0.4);
  EXPECT_EQ(hand.ca, (std::vector<double>{0.8, 0.6}));
}

TEST(Metrics, MatchBruteForceRecount) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::size_t> kd(1, 10);
  std::uniform_int_distribution<std::uint64_t> cd(0, 30);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = kd(rng);
    std::vector<std::uint64_t> counts(k * k);
    for (auto& c : counts) c = cd(rng);
    counts[0] += 1;
    const ConfusionMatrix cm(k, counts);
    const auto m = compute_metrics(cm);
    const auto r = brute_force(cm);
    EXPECT_NEAR(m.oa, r.oa, 1e-12);
    EXPECT_NEAR(m.aa, r.aa, 1e-12);
    if (std::isfinite(r.kappa)) EXPECT_NEAR(m.kappa, r.kappa, 1e-12);
    for (std::size_t c = 0; c < k; ++c) EXPECT_NEAR(m.ca[c], r.ca[c], 1e-12);
  }
}

TEST(Metrics, KappaOneIffDiagonal) {
  EXPECT_EQ(compute_metrics(ConfusionMatrix(3, {5, 0, 0, 0, 7, 0, 0, 0, 2})).kappa, 1.0);
  EXPECT_LT(compute_metrics(ConfusionMatrix(3, {5, 1, 0, 0, 7, 0, 0, 0, 2})).kappa, 1.0);
  // product marginals: row r, col c count = a_r * b_c
  const std::uint64_t a[] = {1, 2, 3}, b[] = {4, 1, 2};
  ConfusionMatrix indep(3);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) indep.add(r, c, a[r] * b[c]);
  }
  EXPECT_EQ(compute_metrics(indep).kappa, 0.0);
}

TEST(Metrics, AbsentClassExcludedFromAverage) {
  const auto m = compute_metrics(ConfusionMatrix(3, {4, 0, 0, 0, 0, 0, 1, 0, 3}));
  EXPECT_EQ(m.absent_classes, (std::vector<std::size_t>{1}));
  EXPECT_EQ(m.ca[1], 0.0);
  EXPECT_DOUBLE_EQ(m.aa, (1.0 + 0.75) / 2.0);
}

TEST(Metrics, EmptyAndMergedMatrices) {
  EXPECT_THROW(compute_metrics(ConfusionMatrix(2)), ContractError);
  ConfusionMatrix a(2), b(2), all(2);
  a.add(0, 1, 3);
  b.add(1, 1, 2);
  all.add(0, 1, 3);
  all.add(1, 1, 2);
  a.merge(b);
  EXPECT_EQ(a, all);
  EXPECT_EQ(a.total(), 5u);
  EXPECT_EQ(a.row_sum(0), 3u);
  EXPECT_EQ(a.col_sum(1), 5u);
  EXPECT_THROW(a.add(2, 0), IndexError);
}

}  // namespace
