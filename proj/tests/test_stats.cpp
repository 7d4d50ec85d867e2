#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "loadalloc/error.hpp"
#include "loadalloc/rng.hpp"
#include "loadalloc/stats.hpp"

using namespace loadalloc;

namespace {

std::vector<double> ranks_by_sorting(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) r[idx[k]] = (i + j + 1) / 2.0;
    i = j;
  }
  return r;
}

// Every assignment of signs to the ranks is equally likely under the null.
double enumerated_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  if (d.empty()) return 1.0;
  std::vector<double> mag;
  for (double x : d) mag.push_back(std::abs(x));
  const auto r = ranks_by_sorting(mag);
  double observed = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0) observed += r[i];
  const std::size_t n = d.size();
  double ge = 0, le = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) w += r[i];
    if (w >= observed - 1e-9) ++ge;
    if (w <= observed + 1e-9) ++le;
  }
  const double total = std::ldexp(1.0, static_cast<int>(n));
  return std::min(1.0, 2.0 * std::min(ge, le) / total);
}

}  // namespace

TEST_CASE("exact signed-rank p equals full sign enumeration for n <= 12") {
  Rng rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const bool ties = trial % 3 == 0;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (ties) {
        a[i] = static_cast<double>(rng.below(6));
        b[i] = static_cast<double>(rng.below(6));
      } else {
        a[i] = rng.normal();
        b[i] = rng.normal() + 0.3;
      }
    }
    const auto got = wilcoxon_signed_rank(a, b);
    CHECK(got.p_value == doctest::Approx(enumerated_p(a, b)).epsilon(1e-12));
    ++compared;
  }
  CHECK(compared == 100);
}

TEST_CASE("exact signed-rank p at n = 16 equals enumeration") {
  Rng rng(16);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> a(16), b(16);
    for (std::size_t i = 0; i < 16; ++i) {
      a[i] = rng.normal();
      b[i] = rng.normal();
    }
    const auto got = wilcoxon_signed_rank(a, b);
    CHECK(got.exact);
    CHECK(got.p_value == doctest::Approx(enumerated_p(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("signed-rank hand cases") {
  const std::vector<double> a{1, 2, 3, 4, 5}, zero(5, 0.0);
  CHECK(wilcoxon_signed_rank(a, zero).p_value == doctest::Approx(0.0625));
  CHECK(wilcoxon_signed_rank(a, zero, Alternative::Greater).p_value == doctest::Approx(1.0 / 32.0));
  CHECK(wilcoxon_signed_rank(a, zero, Alternative::Less).p_value == doctest::Approx(1.0));
  const auto same = wilcoxon_signed_rank(a, a);
  CHECK(same.p_value == 1.0);
  CHECK(same.degenerate);
  CHECK(same.n == 0);
  CHECK_THROWS_AS(wilcoxon_signed_rank(a, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("normal approximation above the exact limit matches a reference implementation") {
  // References from scipy.stats.wilcoxon(zero_method="wilcox", correction=True, method="approx").
  std::vector<double> d, zero;
  for (int i = 0; i < 30; ++i) d.push_back(((i * 37) % 23) - 9.0);
  zero.assign(d.size(), 0.0);
  const auto two = wilcoxon_signed_rank(d, zero);
  CHECK_FALSE(two.exact);
  CHECK(two.n == 29);
  CHECK(two.w_plus == 273.5);
  CHECK(two.p_value == doctest::Approx(0.2297237289085876).epsilon(1e-9));
  CHECK(wilcoxon_signed_rank(d, zero, Alternative::Greater).p_value ==
        doctest::Approx(0.1148618644542938).epsilon(1e-9));
  CHECK(wilcoxon_signed_rank(d, zero, Alternative::Less).p_value == doctest::Approx(0.8892807046104383).epsilon(1e-9));

  std::vector<double> d2;
  for (int i = 0; i < 25; ++i) d2.push_back(((i * 53) % 41) - 15.5);
  CHECK(wilcoxon_signed_rank(d2, std::vector<double>(25, 0.0)).p_value ==
        doctest::Approx(0.16168925412410196).epsilon(1e-9));
}

TEST_CASE("Holm adjustment") {
  const auto adj = holm_bonferroni(std::vector<double>{0.01, 0.04, 0.03});
  CHECK(adj[0] == doctest::Approx(0.03));
  CHECK(adj[1] == doctest::Approx(0.06));
  CHECK(adj[2] == doctest::Approx(0.06));
  CHECK(holm_bonferroni(std::vector<double>{0.2}) == std::vector<double>{0.2});
  for (double p : holm_bonferroni(std::vector<double>{0.1, 0.1, 0.1})) CHECK(p == doctest::Approx(0.3));
  for (double p : holm_bonferroni(std::vector<double>{0.6, 0.6})) CHECK(p == 1.0);
  CHECK(holm_bonferroni(std::vector<double>{}).empty());
  CHECK_THROWS_AS(holm_bonferroni(std::vector<double>{1.5}), ValidationError);
}

TEST_CASE("Holm is monotone in sorted order and never below the raw p") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(12);
    std::vector<double> p(m);
    for (double& x : p) x = rng.uniform() * rng.uniform();
    const auto adj = holm_bonferroni(p);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
    for (std::size_t k = 0; k < m; ++k) {
      CHECK(adj[k] >= p[k]);
      CHECK(adj[k] <= 1.0);
      if (k > 0) CHECK(adj[order[k]] >= adj[order[k - 1]]);
    }
  }
}

TEST_CASE("correlations") {
  std::vector<double> x{1, 2, 3, 4, 5}, lin, sq;
  for (double v : x) {
    lin.push_back(2 * v + 1);
    sq.push_back(v * v);
  }
  CHECK(*pearson(x, lin) == doctest::Approx(1.0));
  CHECK(*spearman(x, lin) == doctest::Approx(1.0));
  CHECK(*spearman(x, sq) == doctest::Approx(1.0));
  CHECK(*pearson(x, sq) < 1.0);
  CHECK_FALSE(pearson(x, std::vector<double>(5, 3.0)).has_value());
  CHECK_FALSE(spearman(std::vector<double>{1}, std::vector<double>{2}).has_value());

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(30), b(30);
    for (int i = 0; i < 30; ++i) {
      a[i] = std::round(rng.normal() * 3);
      b[i] = a[i] + rng.normal();
    }
    double ma = 0, mb = 0;
    for (int i = 0; i < 30; ++i) {
      ma += a[i] / 30;
      mb += b[i] / 30;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < 30; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    CHECK(*pearson(a, b) == doctest::Approx(sab / std::sqrt(saa * sbb)).epsilon(1e-12));
    const auto ra = ranks_by_sorting(a), rb = ranks_by_sorting(b);
    CHECK(average_ranks(a) == ra);
    CHECK(*spearman(a, b) == doctest::Approx(*pearson(ra, rb)).epsilon(1e-12));
  }
}

TEST_CASE("sample moments") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == 5.0);
  CHECK(sample_std(v) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(sample_std(std::vector<double>{3.0}) == 0.0);
}
