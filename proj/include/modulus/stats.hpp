#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "modulus/error.hpp"

namespace modulus {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw ParameterError("mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample (n - 1) standard deviation; zero for a single observation.
inline double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Midranks (1-based) of `values` in the pooled order, doubled so ties stay
/// integral: a value tied across positions 3 and 4 gets 7.
inline std::vector<std::int64_t> doubled_midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::int64_t> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const auto doubled = static_cast<std::int64_t>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = doubled;
    i = j + 1;
  }
  return ranks;
}

enum class RankSumMethod { automatic, exact, normal };

/// Pooled sizes up to this use exact enumeration under `automatic`.
inline constexpr std::size_t exact_rank_sum_limit = 16;

struct RankSumResult {
  double p_value;
  /// Rank sum of the first sample (midranks, not doubled).
  double statistic;
  RankSumMethod method;
};

namespace detail {

inline void check_rank_sum_inputs(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw ParameterError("rank-sum test needs at least 2 observations per sample, got " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  for (std::span<const double> s : {a, b}) {
    for (double x : s) {
      if (!std::isfinite(x)) throw ParameterError("rank-sum sample contains a non-finite value");
    }
  }
  const double first = a[0];
  const bool all_equal = std::all_of(a.begin(), a.end(), [&](double x) { return x == first; }) &&
                         std::all_of(b.begin(), b.end(), [&](double x) { return x == first; });
  if (all_equal) throw DegenerateSampleError("rank-sum test on a pooled sample with zero variance");
}

}  // namespace detail

/// One-sided Wilcoxon rank-sum (Mann-Whitney) test of the alternative "a is
/// stochastically greater than b": p = P(W >= observed) under the null, with
/// W the midrank sum of `a`.
///
/// The exact null distribution is built by dynamic programming over all
/// C(N, |a|) rank assignments; the normal approximation uses the
/// tie-corrected variance and a 0.5 continuity correction.
inline RankSumResult rank_sum_one_sided(std::span<const double> a, std::span<const double> b,
                                        RankSumMethod method = RankSumMethod::automatic) {
  detail::check_rank_sum_inputs(a, b);
  const std::size_t n = a.size(), m = b.size(), total = n + m;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<std::int64_t> ranks = doubled_midranks(pooled);
  const std::int64_t observed2 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n), std::int64_t{0});

  if (method == RankSumMethod::automatic) {
    method = total <= exact_rank_sum_limit ? RankSumMethod::exact : RankSumMethod::normal;
  }

  if (method == RankSumMethod::exact) {
    if (total > 60) throw ParameterError("exact rank-sum enumeration limited to 60 pooled observations");
    // ways[k][s]: number of k-subsets of the ranks seen so far with doubled sum s.
    const std::int64_t max_sum = std::accumulate(ranks.begin(), ranks.end(), std::int64_t{0});
    std::vector<std::vector<double>> ways(n + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::int64_t r : ranks) {
      for (std::size_t k = n; k >= 1; --k) {
        auto& dst = ways[k];
        const auto& src = ways[k - 1];
        for (std::int64_t s = max_sum; s >= r; --s) dst[static_cast<std::size_t>(s)] += src[static_cast<std::size_t>(s - r)];
      }
    }
    double at_least = 0.0, all = 0.0;
    for (std::int64_t s = 0; s <= max_sum; ++s) {
      all += ways[n][static_cast<std::size_t>(s)];
      if (s >= observed2) at_least += ways[n][static_cast<std::size_t>(s)];
    }
    return {at_least / all, static_cast<double>(observed2) / 2.0, RankSumMethod::exact};
  }

  // Tie correction: sum over tie groups of t^3 - t.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double nn = static_cast<double>(n), mm = static_cast<double>(m), big = static_cast<double>(total);
  const double expected = nn * (big + 1.0) / 2.0;
  const double variance = nn * mm / 12.0 * ((big + 1.0) - tie_term / (big * (big - 1.0)));
  if (!(variance > 0.0)) throw DegenerateSampleError("rank-sum variance is zero");
  const double w = static_cast<double>(observed2) / 2.0;
  const double z = (w - expected - 0.5) / std::sqrt(variance);
  return {0.5 * std::erfc(z / std::sqrt(2.0)), w, RankSumMethod::normal};
}

}  // namespace modulus
