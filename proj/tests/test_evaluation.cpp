#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "loadalloc/correction.hpp"
#include "loadalloc/error.hpp"
#include "loadalloc/evaluation.hpp"
#include "support.hpp"

using namespace loadalloc;

namespace {

EvalReport make_report(const std::vector<std::string>& methods, const std::vector<std::uint64_t>& seeds,
                       int n_regions, std::uint64_t data_seed) {
  Rng rng(data_seed);
  EvalReport r;
  for (const auto& m : methods)
    for (auto seed : seeds)
      for (int i = 1; i <= n_regions; ++i) {
        RegionMetrics x;
        x.region_id = i;
        x.rmse = rng.uniform(2, 12);
        x.mae = x.rmse * rng.uniform(0.5, 1.0);
        if (rng.uniform() > 0.1) x.corr = rng.uniform(-0.5, 0.9);
        r.rows.push_back({m, seed, x});
      }
  return r;
}

}  // namespace

TEST_CASE("region metrics hand cases") {
  const std::vector<double> a{3, 4};
  const auto m = region_metrics(1, std::vector<double>{1, 2}, a);
  CHECK(m.rmse == doctest::Approx(2.0));
  CHECK(m.mae == doctest::Approx(2.0));
  CHECK(*m.corr == doctest::Approx(1.0));
  const auto same = region_metrics(1, a, a);
  CHECK(same.rmse == 0.0);
  CHECK(same.mae == 0.0);
  CHECK(*same.corr == doctest::Approx(1.0));
  const std::vector<double> flat{2, 2};
  CHECK_FALSE(region_metrics(1, flat, flat).corr.has_value());
  CHECK_THROWS_AS(region_metrics(1, std::vector<double>{}, std::vector<double>{}), ValidationError);
}

TEST_CASE("region metrics match the scripted formulas and rmse >= mae") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(20);
    std::vector<double> p(n), a(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform(0, 50);
      a[i] = rng.uniform(0, 50);
    }
    double sq = 0, ab = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sq += (p[i] - a[i]) * (p[i] - a[i]);
      ab += std::abs(p[i] - a[i]);
    }
    const auto m = region_metrics(1, p, a);
    CHECK(m.rmse == doctest::Approx(std::sqrt(sq / n)).epsilon(1e-12));
    CHECK(m.mae == doctest::Approx(ab / n).epsilon(1e-12));
    CHECK(m.rmse >= m.mae);
  }
  // Equal-magnitude residuals: the norms coincide and must not cross.
  const auto tie = region_metrics(1, std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{0.2, 0.1, 0.4});
  CHECK(tie.rmse >= tie.mae);
}

TEST_CASE("marginal effects on published RMSE pairs") {
  CHECK(format_marginal_effect(marginal_effect(12.39, 7.31)) == "-5.08 (-41.0%)");
  CHECK(format_marginal_effect(marginal_effect(9.27, 11.20)) == "+1.93 (+20.8%)");
  CHECK(format_marginal_effect(marginal_effect(9.27, 9.03)) == "-0.24 (-2.6%)");
  const auto none = marginal_effect(9.27, 9.27);
  CHECK(none.delta == 0.0);
  CHECK(none.percent == 0.0);
  CHECK(format_marginal_effect(none) == "0.00 (0.0%)");
}

TEST_CASE("RMSE and correlation can move in opposite directions") {
  // Truth spreads mildly upward; the base is nearly flat and slightly inverted.
  const std::vector<double> truth{30, 33, 37};
  const double total = 100.0;
  Region region;
  region.id = 1;
  region.demand_total = total;
  region.consumption_shares = {1, 0, 0, 0, 0};
  region.area_km2 = 1;
  std::vector<Agent> agents;
  std::vector<Substation> subs;
  for (int i = 0; i < 3; ++i) {
    Agent a;
    a.id = i + 1;
    a.coords = {10.0 * i, 0};
    a.landuse = {1, 0, 0, 0, 0};
    a.region_id = 1;
    agents.push_back(a);
    Substation s;
    s.id = i + 1;
    s.coords = {10.0 * i, 0};
    s.region_id = 1;
    s.demand_actual = truth[static_cast<std::size_t>(i)];
    subs.push_back(s);
  }
  const Scenario s({region}, agents, subs);
  const AgentDemandField base{{34, 33, 33}, "base", true};
  CorrectionFactorField f;
  f.factor = {1, 2, 4};
  const auto corrected = correct_multiplicative_renorm(base, f, s);
  const auto v = assign_voronoi(s);
  const auto before = scenario_metrics(aggregate_to_substations(base.demand, v, s), s)[0];
  const auto after = scenario_metrics(aggregate_to_substations(corrected.demand, v, s), s)[0];
  CHECK(*after.corr > *before.corr);
  CHECK(after.rmse > before.rmse);
}

TEST_CASE("seed averaging and aggregation") {
  EvalReport r;
  r.rows.push_back({"A", 1, {2, 4.0, 3.0, 0.5}});
  r.rows.push_back({"A", 1, {1, 2.0, 1.0, std::nullopt}});
  r.rows.push_back({"A", 2, {2, 6.0, 5.0, 0.7}});
  r.rows.push_back({"A", 2, {1, 4.0, 3.0, std::nullopt}});
  const auto avg = seed_averaged(r, "A");
  REQUIRE(avg.size() == 2);
  CHECK(avg[0].region_id == 1);
  CHECK(avg[0].rmse == 3.0);
  CHECK_FALSE(avg[0].corr.has_value());
  CHECK(avg[1].rmse == 5.0);
  CHECK(*avg[1].corr == doctest::Approx(0.6));
  const auto agg = aggregate(r, "A");
  CHECK(agg.rmse.mean == 4.0);
  CHECK(agg.rmse.std == doctest::Approx(std::sqrt(2.0)));
  CHECK(agg.corr.n == 1);
  CHECK(agg.corr.n_missing == 1);
}

TEST_CASE("aggregates do not depend on row order") {
  auto r = make_report({"A", "B"}, {1, 2, 3}, 12, 5);
  const auto before = aggregate(r, "B");
  Rng rng(3);
  for (std::size_t i = r.rows.size() - 1; i > 0; --i) std::swap(r.rows[i], r.rows[rng.below(i + 1)]);
  const auto after = aggregate(r, "B");
  CHECK(after.rmse.mean == doctest::Approx(before.rmse.mean).epsilon(1e-14));
  CHECK(after.rmse.std == doctest::Approx(before.rmse.std).epsilon(1e-14));
  CHECK(after.corr.mean == doctest::Approx(before.corr.mean).epsilon(1e-14));
  CHECK(after.mae.mean == doctest::Approx(before.mae.mean).epsilon(1e-14));
}

TEST_CASE("planned comparisons use per-seed Holm families") {
  EvalReport r;
  for (std::uint64_t seed : {1u, 2u, 3u})
    for (int i = 1; i <= 10; ++i) {
      r.rows.push_back({"GNN", seed, {i, 5.0 + i, 4.0, 0.5}});
      r.rows.push_back({"GPM", seed, {i, 8.0 + i + 0.01 * seed, 6.0, 0.3}});
      r.rows.push_back({"GNNpostP", seed, {i, 5.0 + i + (i % 2 ? 0.5 : -0.5) * i, 4.0, 0.5}});
    }
  const auto res = planned_comparisons(r, default_planned_comparisons(), Metric::Rmse);
  REQUIRE(res.size() == 2);
  CHECK(res[0].pair.method_a == "GNN");
  CHECK(res[0].pair.method_b == "GPM");
  CHECK(res[0].delta < 0.0);
  CHECK(res[0].n_pairs == 10);
  // Every GNN region beats GPM: exact two-sided p = 2 / 2^10 in each seed.
  for (double p : res[0].per_seed_p) CHECK(p == doctest::Approx(2.0 / 1024.0));
  for (std::size_t k = 0; k < 3; ++k) {
    const auto fam = holm_bonferroni(std::vector<double>{res[0].per_seed_p[k], res[1].per_seed_p[k]});
    CHECK(res[0].per_seed_holm[k] == fam[0]);
    CHECK(res[1].per_seed_holm[k] == fam[1]);
  }
  CHECK(res[0].median_holm_p == doctest::Approx(2 * 2.0 / 1024.0));
  CHECK(res[0].significant);
  CHECK_FALSE(res[0].underpowered);
  CHECK_FALSE(res[1].significant);
}

TEST_CASE("comparisons with fewer than five pairs are flagged") {
  EvalReport r;
  for (int i = 1; i <= 3; ++i) {
    r.rows.push_back({"GNN", 1, {i, 1.0 * i, 1.0, std::nullopt}});
    r.rows.push_back({"GPM", 1, {i, 2.0 * i, 1.0, std::nullopt}});
  }
  const auto res = planned_comparisons(r, default_planned_comparisons(), Metric::Corr);
  REQUIRE(res.size() == 1);
  CHECK(res[0].underpowered);
  CHECK(res[0].n_pairs == 0);
  CHECK(res[0].median_holm_p == 1.0);
}

TEST_CASE("nine planned comparisons") {
  const auto c = default_planned_comparisons();
  CHECK(c.size() == 9);
  CHECK(c.front().method_a == "GNN");
  CHECK(c.back().method_b == "GPMpostNP");
}

TEST_CASE("land-use entropy") {
  CHECK(landuse_entropy({0.2, 0.2, 0.2, 0.2, 0.2}) == doctest::Approx(std::log(5.0)));
  CHECK(landuse_entropy({1, 0, 0, 0, 0}) == 0.0);
}

TEST_CASE("stratification bands") {
  const auto s0 = testing::random_scenario(30, 6, 20, 2);
  auto regions = s0.regions();
  const std::vector<double> density{0.1, 0.27, 0.3, 0.4, 0.41, 0.9};
  for (std::size_t r = 0; r < regions.size(); ++r) regions[r].area_km2 = regions[r].demand_total / density[r];
  const Scenario s(regions, s0.agents(), s0.substations());
  EvalReport report;
  for (std::size_t r = 0; r < regions.size(); ++r) report.rows.push_back({"A", 1, {regions[r].id, 1.0 + r, 1.0, 0.1}});

  const auto rows = stratify(report, s);
  REQUIRE(rows.size() == 6);
  std::array<std::size_t, 3> per_band{};
  for (const auto& row : rows) per_band[static_cast<std::size_t>(row.density_band)] += row.n;
  CHECK(per_band == std::array<std::size_t, 3>{2, 2, 2});

  StratifyConfig data_driven;
  data_driven.density_breaks.reset();
  data_driven.entropy_break.reset();
  std::size_t total = 0, high_div = 0;
  for (const auto& row : stratify(report, s, data_driven)) {
    total += row.n;
    if (row.diversity_band == 1) high_div += row.n;
  }
  CHECK(total == 6);
  CHECK(high_div == 3);

  report.rows.pop_back();
  CHECK_THROWS_AS(stratify(report, s), ValidationError);
}

TEST_CASE("jackknife leave-one-out correlation") {
  std::vector<double> x, y;
  for (int i = 0; i < 13; ++i) {
    x.push_back(i);
    y.push_back(3 * i - 2);
  }
  const auto lin = jackknife_loo_corr(x, y);
  for (const auto& c : lin.loo) CHECK(*c == doctest::Approx(1.0));

  // A duplicated point at the centroid carries no information.
  std::vector<double> px{1, 4, 2, 5, 3, 3}, py{2, 3, 5, 4, 3.5, 3.5};
  const auto dup = jackknife_loo_corr(px, py);
  CHECK(*dup.loo[5] == doctest::Approx(*dup.full).epsilon(1e-12));

  // One dominant node carries the correlation; dropping it hurts most.
  Rng rng(12);
  std::vector<double> p, a;
  for (int i = 0; i < 12; ++i) {
    a.push_back(rng.uniform(5, 15));
    p.push_back(rng.uniform(5, 15));
  }
  a.push_back(45);
  p.push_back(40);
  const auto lev = jackknife_loo_corr(p, a);
  CHECK(*lev.full > 0.8);
  CHECK(lev.argmin == 12);
  CHECK(*lev.loo[12] < *lev.full - 0.5);
  CHECK_THROWS_AS(jackknife_loo_corr(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), ValidationError);
}

TEST_CASE("report CSV round-trip") {
  const auto r = make_report({"Uni", "GNNpostNP"}, {42, 123}, 5, 9);
  const auto text = report_seed_csv(r);
  CHECK(text.rfind("method,seed,region_id,rmse,mae,corr\n", 0) == 0);
  const auto back = parse_report_seed_csv(text);
  REQUIRE(back.rows.size() == r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(back.rows[i].method == r.rows[i].method);
    CHECK(back.rows[i].seed == r.rows[i].seed);
    CHECK(back.rows[i].metrics.rmse == r.rows[i].metrics.rmse);
    CHECK(back.rows[i].metrics.mae == r.rows[i].metrics.mae);
    CHECK(back.rows[i].metrics.corr == r.rows[i].metrics.corr);
  }
  CHECK(report_seed_csv(back) == text);
  CHECK(report_csv(r).rfind("method,region_id,rmse,mae,corr\n", 0) == 0);
  CHECK_THROWS_AS(parse_report_seed_csv("method,seed\nA,1\n"), ValidationError);
  CHECK_THROWS_AS(parse_report_seed_csv("method,seed,region_id,rmse,mae,corr\nA,1,2,x,1,\n"), ValidationError);
}

TEST_CASE("summary JSON is deterministic") {
  const auto r = make_report({"GNN", "GPM"}, {1, 2}, 8, 10);
  const auto a = report_summary_json(r, default_planned_comparisons());
  CHECK(a == report_summary_json(r, default_planned_comparisons()));
  CHECK(a.find("\"comparisons\"") != std::string::npos);
}
