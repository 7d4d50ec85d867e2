#include <doctest.h>

#include <cmath>

#include "loadalloc/correction.hpp"
#include "loadalloc/error.hpp"
#include "support.hpp"

using namespace loadalloc;

namespace {

Scenario pair_world(double total) {
  Region r;
  r.id = 1;
  r.demand_total = total;
  r.consumption_shares = {1, 0, 0, 0, 0};
  r.area_km2 = 1;
  std::vector<Agent> agents(2);
  for (int i = 0; i < 2; ++i) {
    agents[i].id = i + 1;
    agents[i].coords = {static_cast<double>(i), 0};
    agents[i].landuse = {1, 0, 0, 0, 0};
    agents[i].region_id = 1;
  }
  Substation s;
  s.id = 1;
  s.region_id = 1;
  s.demand_actual = total;
  return Scenario({r}, agents, {s});
}

AgentDemandField field(std::vector<double> d) { return {std::move(d), "base", true}; }

CorrectionFactorField factors(std::vector<double> f) {
  CorrectionFactorField out;
  out.factor = std::move(f);
  return out;
}

CorrectionFactorField random_factors(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  CorrectionFactorField out;
  for (std::size_t i = 0; i < n; ++i) out.factor.push_back(rng.uniform(0.05, 5.0));
  return out;
}

}  // namespace

TEST_CASE("multiplicative renormalized hand cases") {
  const auto s = pair_world(8.0);
  const auto out = correct_multiplicative_renorm(field({1, 1}), factors({1, 3}), s);
  CHECK(out.demand[0] == doctest::Approx(2.0));
  CHECK(out.demand[1] == doctest::Approx(6.0));
  CHECK(out.conserving);

  const auto base = field({3.3, 4.7});
  const auto same = correct_multiplicative_renorm(base, factors({1, 1}), s);
  CHECK(same.demand == base.demand);
  const auto flat = correct_multiplicative_renorm(base, factors({2.5, 2.5}), s);
  CHECK(flat.demand == base.demand);

  const auto zero = correct_multiplicative_renorm(field({0, 0}), factors({1, 3}), pair_world(8.0));
  CHECK(zero.demand == std::vector<double>{0, 0});
}

TEST_CASE("multiplicative raw skips renormalization") {
  const auto s = pair_world(5.0);
  const auto out = correct_multiplicative_raw(field({2, 3}), factors({2, 0.5}), s);
  CHECK(out.demand[0] == 4.0);
  CHECK(out.demand[1] == 1.5);
  CHECK_FALSE(out.conserving);
  CHECK(max_conservation_error(out, s) > 0.09);
  CHECK(correct_multiplicative_raw(field({2, 3}), factors({1, 1}), s).demand == std::vector<double>{2, 3});
}

TEST_CASE("additive blend hand cases") {
  const auto s = pair_world(10.0);
  CHECK(correct_additive_renorm(field({5, 5}), factors({1, 3}), s, 0.0).demand == std::vector<double>{5, 5});
  const auto full = correct_additive_renorm(field({5, 5}), factors({1, 3}), s, INFINITY).demand;
  CHECK(full[0] == doctest::Approx(2.5));
  CHECK(full[1] == doctest::Approx(7.5));
  const auto half = correct_additive_renorm(field({5, 5}), factors({1, 3}), s, 1.0).demand;
  CHECK(half[0] == doctest::Approx(0.5 * 5 + 0.5 * 2.5));
  CHECK_THROWS_AS(correct_additive_renorm(field({5, 5}), factors({1, 3}), s, -1.0), ValidationError);
}

TEST_CASE("renormalizing modes conserve demand on random inputs") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto s = testing::random_scenario(seed, 3, 40, 4);
    const auto base = weight_gpm(s);
    const auto f = random_factors(s.agents().size(), seed + 100);
    const auto mult = correct_multiplicative_renorm(base, f, s);
    CHECK(testing::max_relative_gap(mult.demand, s) <= 1e-9);
    for (double gain : {0.1, 1.0, 10.0}) {
      const auto add = correct_additive_renorm(base, f, s, gain);
      CHECK(testing::max_relative_gap(add.demand, s) <= 1e-9);
      for (double d : add.demand) CHECK(d >= 0.0);
    }
    CorrectionConfig cfg;
    cfg.mode = CorrectionMode::NoiseRenorm;
    cfg.noise_seed = seed;
    for (const auto& out : correct_noise_renorm(base, s, f, cfg)) CHECK(testing::max_relative_gap(out.demand, s) <= 1e-9);
    CHECK(testing::max_relative_gap(correct_multiplicative_raw(base, f, s).demand, s) > 1e-6);
  }
}

TEST_CASE("multiplicative renormalized correction is invariant to factor rescaling") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = testing::random_scenario(seed, 2, 50, 4);
    const auto base = weight_uniform(s);
    auto f = random_factors(s.agents().size(), seed);
    const auto a = correct_multiplicative_renorm(base, f, s).demand;
    for (double c : {0.001, 0.5, 7.0, 1e4}) {
      auto g = f;
      for (double& x : g.factor) x *= c;
      const auto b = correct_multiplicative_renorm(base, g, s).demand;
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("sequential application equals the product factor") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = testing::random_scenario(seed, 2, 50, 4);
    const auto base = weight_gpm(s);
    const auto f1 = random_factors(s.agents().size(), seed * 3);
    const auto f2 = random_factors(s.agents().size(), seed * 5);
    auto product = f1;
    for (std::size_t i = 0; i < product.factor.size(); ++i) product.factor[i] *= f2.factor[i];
    const auto once = correct_multiplicative_renorm(base, product, s).demand;
    const auto twice = correct_multiplicative_renorm(correct_multiplicative_renorm(base, f1, s), f2, s).demand;
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i] == doctest::Approx(twice[i]).epsilon(1e-12));
  }
}

TEST_CASE("additive output shares lie between base and factor shares") {
  const auto s = testing::random_scenario(9, 2, 40, 3);
  const auto base = weight_gpm(s);
  const auto f = random_factors(s.agents().size(), 9);
  const auto out = correct_additive_renorm(base, f, s, 0.7).demand;
  const double kappa = 0.7 / 1.7;
  for (std::size_t r = 0; r < s.regions().size(); ++r) {
    const double total = s.regions()[r].demand_total;
    double fsum = 0.0;
    for (std::size_t a : s.region_agents(r)) fsum += f.factor[a];
    for (std::size_t a : s.region_agents(r)) {
      const double b = base.demand[a] / total;
      const double q = f.factor[a] / fsum;
      CHECK(out[a] / total == doctest::Approx((1 - kappa) * b + kappa * q).epsilon(1e-12));
      CHECK(out[a] / total >= std::min(b, q) - 1e-15);
      CHECK(out[a] / total <= std::max(b, q) + 1e-15);
    }
  }
}

TEST_CASE("noise correction") {
  const auto s = testing::random_scenario(17, 2, 60, 4);
  const auto base = weight_gpm(s);
  const auto ref = random_factors(s.agents().size(), 17);
  CorrectionConfig cfg;
  cfg.mode = CorrectionMode::NoiseRenorm;
  cfg.noise_seed = 5;
  const auto a = correct_noise_renorm(base, s, ref, cfg);
  const auto b = correct_noise_renorm(base, s, ref, cfg);
  REQUIRE(a.size() == 10);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].demand == b[k].demand);
  CHECK(a[0].demand != a[1].demand);
  cfg.noise_seed = 6;
  CHECK(correct_noise_renorm(base, s, ref, cfg)[0].demand != a[0].demand);

  // A constant reference has (numerically) zero log-variance: every repeat reproduces the base.
  CorrectionFactorField constant;
  constant.factor.assign(s.agents().size(), 1.7);
  for (const auto& out : correct_noise_renorm(base, s, constant, cfg))
    for (std::size_t a = 0; a < out.demand.size(); ++a)
      CHECK(out.demand[a] == doctest::Approx(base.demand[a]).epsilon(1e-12));

  // Matched log-moments.
  const auto noise = lognormal_noise_field(200000, 0.3, 0.8, 1);
  double m = 0, v = 0;
  for (double f : noise.factor) m += std::log(f);
  m /= noise.factor.size();
  for (double f : noise.factor) v += (std::log(f) - m) * (std::log(f) - m);
  v /= noise.factor.size() - 1;
  CHECK(m == doctest::Approx(0.3).epsilon(0.03));
  CHECK(std::sqrt(v) == doctest::Approx(0.8).epsilon(0.01));

  cfg.noise_repeats = 0;
  CHECK_THROWS_AS(correct_noise_renorm(base, s, ref, cfg), ValidationError);
}

TEST_CASE("factor fields must be positive and complete") {
  const auto s = pair_world(8.0);
  CHECK_THROWS_AS(correct_multiplicative_renorm(field({1, 1}), factors({1, 0}), s), ValidationError);
  CHECK_THROWS_AS(correct_multiplicative_renorm(field({1, 1}), factors({1}), s), ValidationError);
  CHECK_THROWS_AS(correct_multiplicative_renorm(field({1}), factors({1, 1}), s), ValidationError);
}
