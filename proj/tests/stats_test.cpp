#include <gtest/gtest.h>

#include <cmath>

#include "modulus/random.hpp"
#include "modulus/stats.hpp"

using namespace modulus;

namespace {

// P(W >= observed) by enumerating every |a|-subset of pooled positions.
double brute_force_p(const std::vector<double>& a, const std::vector<double>& b, double* p_equal = nullptr) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = doubled_midranks(pooled);
  std::int64_t observed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) observed += ranks[i];
  const std::size_t total = pooled.size();
  std::size_t hits = 0, equal = 0, all = 0;
  for (std::uint32_t mask = 0; mask < (1u << total); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != a.size()) continue;
    std::int64_t s = 0;
    for (std::size_t i = 0; i < total; ++i) {
      if (mask & (1u << i)) s += ranks[i];
    }
    ++all;
    hits += s >= observed;
    equal += s == observed;
  }
  if (p_equal) *p_equal = static_cast<double>(equal) / static_cast<double>(all);
  return static_cast<double>(hits) / static_cast<double>(all);
}

std::vector<double> draw(Rng& rng, std::size_t n, double shift, bool coarse) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal() + shift;
    xs.push_back(coarse ? std::round(x * 2.0) / 2.0 : x);
  }
  return xs;
}

}  // namespace

TEST(Summary, MeanAndSampleStd) {
  const std::vector<double> xs = {0.70, 0.72, 0.74};
  EXPECT_NEAR(mean(xs), 0.72, 1e-15);
  EXPECT_NEAR(sample_std(xs), 0.02, 1e-15);
  EXPECT_EQ(sample_std(std::vector<double>{0.5}), 0.0);
  EXPECT_THROW(mean(std::vector<double>{}), ParameterError);
}

TEST(Midranks, TiesShareAverage) {
  const std::vector<double> xs = {3.0, 1.0, 3.0, 2.0, 3.0};
  EXPECT_EQ(doubled_midranks(xs), (std::vector<std::int64_t>{8, 2, 8, 4, 8}));
}

TEST(RankSum, CompleteSeparation) {
  const std::vector<double> hi = {0.9, 0.91, 0.92}, lo = {0.1, 0.2, 0.3};
  const auto r = rank_sum_one_sided(hi, lo);
  EXPECT_DOUBLE_EQ(r.p_value, 0.05);
  EXPECT_EQ(r.statistic, 15.0);
  EXPECT_EQ(r.method, RankSumMethod::exact);
  EXPECT_DOUBLE_EQ(rank_sum_one_sided(lo, hi).p_value, 1.0);
  const std::vector<double> hi4 = {5, 6, 7, 8}, lo4 = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(rank_sum_one_sided(hi4, lo4).p_value, 1.0 / 70.0);
}

TEST(RankSum, ExactMatchesBruteForce) {
  Rng rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(6), m = 2 + rng.below(6);
    const bool coarse = trial % 2 == 0;
    const auto a = draw(rng, n, 0.4, coarse), b = draw(rng, m, 0.0, coarse);
    bool degenerate = true;
    for (double x : a) degenerate &= x == a[0];
    for (double x : b) degenerate &= x == a[0];
    if (degenerate) continue;
    EXPECT_NEAR(rank_sum_one_sided(a, b, RankSumMethod::exact).p_value, brute_force_p(a, b), 1e-12) << trial;
  }
}

TEST(RankSum, OppositeTailsSumToOnePlusPointMass) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto a = draw(rng, 5, 0.2, true), b = draw(rng, 6, 0.0, true);
    double p_equal = 0.0;
    brute_force_p(a, b, &p_equal);
    const double forward = rank_sum_one_sided(a, b, RankSumMethod::exact).p_value;
    const double backward = rank_sum_one_sided(b, a, RankSumMethod::exact).p_value;
    EXPECT_NEAR(forward + backward, 1.0 + p_equal, 1e-12) << trial;
  }
}

TEST(RankSum, NormalApproximationTracksExact) {
  Rng rng(23);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = draw(rng, 8, 0.5, false), b = draw(rng, 8, 0.0, false);
    const double exact = rank_sum_one_sided(a, b, RankSumMethod::exact).p_value;
    const double normal = rank_sum_one_sided(a, b, RankSumMethod::normal).p_value;
    worst = std::max(worst, std::abs(exact - normal));
  }
  EXPECT_LE(worst, 0.01);
}

TEST(RankSum, AutomaticSwitchesToNormalForLargeSamples) {
  Rng rng(2);
  const auto a = draw(rng, 30, 1.0, false), b = draw(rng, 30, 0.0, false);
  const auto r = rank_sum_one_sided(a, b);
  EXPECT_EQ(r.method, RankSumMethod::normal);
  EXPECT_LT(r.p_value, 0.01);
}

TEST(RankSum, InvariantUnderMonotoneTransform) {
  Rng rng(8);
  const auto a = draw(rng, 6, 0.3, false), b = draw(rng, 7, 0.0, false);
  std::vector<double> ea, eb;
  for (double x : a) ea.push_back(std::exp(3.0 * x) + 1.0);
  for (double x : b) eb.push_back(std::exp(3.0 * x) + 1.0);
  EXPECT_EQ(rank_sum_one_sided(a, b).p_value, rank_sum_one_sided(ea, eb).p_value);
}

TEST(RankSum, InputValidation) {
  const std::vector<double> same = {0.5, 0.5, 0.5};
  EXPECT_THROW(rank_sum_one_sided(same, same), DegenerateSampleError);
  EXPECT_THROW(rank_sum_one_sided(std::vector<double>{1.0}, same), ParameterError);
  EXPECT_THROW(rank_sum_one_sided(std::vector<double>{1.0, NAN}, same), ParameterError);
  // Constant within each sample is fine as long as the pool varies.
  EXPECT_DOUBLE_EQ(rank_sum_one_sided(std::vector<double>{0.6, 0.6, 0.6}, same).p_value, 0.05);
}
