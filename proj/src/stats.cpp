#include "loadalloc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "loadalloc/error.hpp"

namespace loadalloc {

namespace {

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("correlation inputs differ in length");
  if (x.size() < 2) return std::nullopt;
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("correlation inputs differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, Alternative alternative) {
  if (a.size() != b.size()) throw ValidationError("paired samples differ in length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw ValidationError("non-finite paired difference");
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult result;
  result.n = diffs.size();
  if (diffs.empty()) {
    result.degenerate = true;
    result.p_value = 1.0;
    return result;
  }

  std::vector<double> magnitudes(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) magnitudes[i] = std::abs(diffs[i]);
  const auto ranks = average_ranks(magnitudes);
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0.0) result.w_plus += ranks[i];
  }
  const auto n = static_cast<double>(result.n);

  double p_upper = 1.0;  // P(W+ >= observed)
  double p_lower = 1.0;  // P(W+ <= observed)
  if (result.n <= kWilcoxonExactLimit) {
    // Average ranks are multiples of 1/2, so doubled ranks index an integer DP.
    std::vector<int> doubled(ranks.size());
    int max_sum = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      max_sum += doubled[i];
    }
    std::vector<double> counts(static_cast<std::size_t>(max_sum) + 1, 0.0);
    counts[0] = 1.0;
    int reach = 0;
    for (int r : doubled) {
      for (int s = reach; s >= 0; --s) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
      reach += r;
    }
    const double total = std::ldexp(1.0, static_cast<int>(result.n));
    const int observed = static_cast<int>(std::lround(2.0 * result.w_plus));
    double upper = 0.0, lower = 0.0;
    for (int s = 0; s <= max_sum; ++s) {
      if (s >= observed) upper += counts[static_cast<std::size_t>(s)];
      if (s <= observed) lower += counts[static_cast<std::size_t>(s)];
    }
    p_upper = upper / total;
    p_lower = lower / total;
  } else {
    result.exact = false;
    const double mu = n * (n + 1.0) / 4.0;
    double tie_term = 0.0;
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      const auto t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
    const double sigma = std::sqrt(n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0);
    if (sigma == 0.0) {
      result.degenerate = true;
      return result;
    }
    p_upper = normal_upper_tail((result.w_plus - mu - 0.5) / sigma);
    p_lower = 1.0 - normal_upper_tail((result.w_plus - mu + 0.5) / sigma);
  }

  switch (alternative) {
    case Alternative::Greater:
      result.p_value = p_upper;
      break;
    case Alternative::Less:
      result.p_value = p_lower;
      break;
    case Alternative::TwoSided:
      result.p_value = std::min(1.0, 2.0 * std::min(p_upper, p_lower));
      break;
  }
  return result;
}

std::vector<double> holm_bonferroni(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double scaled = std::min(1.0, static_cast<double>(m - k) * p_values[order[k]]);
    running = std::max(running, scaled);
    adjusted[order[k]] = running;
  }
  return adjusted;
}

}  // namespace loadalloc
