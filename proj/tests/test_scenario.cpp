#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "loadalloc/auxiliary.hpp"
#include "loadalloc/error.hpp"
#include "loadalloc/scenario.hpp"
#include "loadalloc/stats.hpp"
#include "support.hpp"

using namespace loadalloc;
namespace fs = std::filesystem;

namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.n_regions = 3;
  c.agents_per_region = 300;
  c.substations_per_region = 12;
  return c;
}

void check_same(const Scenario& a, const Scenario& b) {
  REQUIRE(a.regions().size() == b.regions().size());
  REQUIRE(a.agents().size() == b.agents().size());
  REQUIRE(a.substations().size() == b.substations().size());
  for (std::size_t r = 0; r < a.regions().size(); ++r) {
    const auto &x = a.regions()[r], &y = b.regions()[r];
    CHECK(x.id == y.id);
    CHECK(x.demand_total == y.demand_total);
    CHECK(x.consumption_shares == y.consumption_shares);
    CHECK(x.area_km2 == y.area_km2);
  }
  for (std::size_t i = 0; i < a.agents().size(); ++i) {
    const auto &x = a.agents()[i], &y = b.agents()[i];
    CHECK(x.id == y.id);
    CHECK(x.coords.x_km == y.coords.x_km);
    CHECK(x.coords.y_km == y.coords.y_km);
    CHECK(x.landuse == y.landuse);
    CHECK(x.ntl == y.ntl);
    CHECK(x.region_id == y.region_id);
  }
  for (std::size_t j = 0; j < a.substations().size(); ++j) {
    const auto &x = a.substations()[j], &y = b.substations()[j];
    CHECK(x.id == y.id);
    CHECK(x.coords.x_km == y.coords.x_km);
    CHECK(x.coords.y_km == y.coords.y_km);
    CHECK(x.demand_actual == y.demand_actual);
    CHECK(x.region_id == y.region_id);
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

double mean_region_spearman(const GeneratedScenario& g) {
  const auto& s = g.scenario;
  double total = 0.0;
  for (std::size_t r = 0; r < s.regions().size(); ++r) {
    std::vector<double> ntl, demand;
    for (std::size_t a : s.region_agents(r)) {
      ntl.push_back(s.agents()[a].ntl);
      demand.push_back(g.agent_demand[a]);
    }
    total += spearman(ntl, demand).value_or(0.0);
  }
  return total / static_cast<double>(s.regions().size());
}

}  // namespace

TEST_CASE("generated totals are exact sums of agent truth") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto g = generate(small(seed));
    const auto& s = g.scenario;
    CHECK(g.agent_demand.size() == s.agents().size());
    for (std::size_t r = 0; r < s.regions().size(); ++r) {
      double sum = 0.0;
      for (std::size_t a : s.region_agents(r)) sum += g.agent_demand[a];
      CHECK(sum == s.regions()[r].demand_total);
      double subs = 0.0;
      for (std::size_t j : s.region_substations(r)) subs += s.substations()[j].demand_actual;
      CHECK(subs == doctest::Approx(sum).epsilon(1e-12));
      double shares = 0.0;
      for (double x : s.regions()[r].consumption_shares) shares += x;
      CHECK(shares == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (const auto& a : s.agents()) {
      double lu = 0.0;
      for (double x : a.landuse) lu += x;
      CHECK(lu == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(a.ntl >= 0.0);
    }
  }
}

TEST_CASE("a faithful noiseless radiance field ranks agents exactly") {
  auto c = small(7);
  c.ntl_fidelity = 1.0;
  c.ntl_noise = 0.0;
  c.demand_noise = 0.0;
  c.ntl_dark_threshold = 0.0;
  const auto g = generate(c);
  for (std::size_t r = 0; r < g.scenario.regions().size(); ++r) {
    std::vector<double> ntl, demand;
    for (std::size_t a : g.scenario.region_agents(r)) {
      ntl.push_back(g.scenario.agents()[a].ntl);
      demand.push_back(g.agent_demand[a]);
    }
    CHECK(*spearman(ntl, demand) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("radiance fidelity is monotone over a seed ensemble") {
  double previous = -1.0;
  for (double fid : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      auto c = small(seed);
      c.ntl_fidelity = fid;
      sum += mean_region_spearman(generate(c));
    }
    const double avg = sum / 8.0;
    CHECK(avg >= previous - 0.02);
    previous = avg;
  }
  CHECK(previous > 0.5);
}

TEST_CASE("default factors are moderately correlated") {
  // A scaled-down version of the default config keeps the same knobs.
  SynthConfig c;
  c.n_regions = 4;
  c.agents_per_region = 1000;
  c.substations_per_region = 60;
  const auto g = generate(c);
  const auto fn = ntl_factor(g.scenario);
  const auto fp = prox_factor(g.scenario);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < g.scenario.agents().size(); ++i) {
    if (!is_rci(g.scenario.agents()[i])) continue;
    a.push_back(fn.factor[i]);
    b.push_back(fp.factor[i]);
  }
  const double r = *pearson(a, b);
  MESSAGE("Pearson(ntl, prox) = " << r);
  CHECK(r >= 0.2);
  CHECK(r <= 0.6);
}

TEST_CASE("generation is deterministic per seed") {
  testing::TempDir d1, d2;
  save_scenario(generate(small(11)).scenario, d1.path());
  save_scenario(generate(small(11)).scenario, d2.path());
  for (const char* f : {"regions.csv", "agents.csv", "substations.csv"}) CHECK(slurp(d1.path() / f) == slurp(d2.path() / f));
  const auto other = generate(small(12));
  CHECK(other.scenario.agents()[0].coords.x_km != generate(small(11)).scenario.agents()[0].coords.x_km);
}

TEST_CASE("invalid generator configs are rejected") {
  auto c = small(1);
  c.n_regions = 0;
  CHECK_THROWS_AS(generate(c), ValidationError);
  c = small(1);
  c.ntl_fidelity = 1.5;
  CHECK_THROWS_AS(generate(c), ValidationError);
  c = small(1);
  c.substations_per_region = 0;
  CHECK_THROWS_AS(generate(c), ValidationError);
}

TEST_CASE("save and load round-trip") {
  const auto s = generate(small(5)).scenario;
  testing::TempDir plain, packed;
  save_scenario(s, plain.path());
  check_same(s, load_scenario(plain.path()));
  save_scenario(s, packed.path(), true);
  CHECK(fs::exists(packed.path() / "agents.csv.gz"));
  CHECK_FALSE(fs::exists(packed.path() / "agents.csv"));
  check_same(s, load_scenario(packed.path()));

  const auto t = testing::random_scenario(4);
  testing::TempDir other;
  save_scenario(t, other.path());
  check_same(t, load_scenario(other.path()));
}

TEST_CASE("schema violations name the offending artifact") {
  const auto s = testing::random_scenario(6);
  testing::TempDir dir;
  save_scenario(s, dir.path());
  const auto subs = slurp(dir.path() / "substations.csv");

  auto header_end = subs.find('\n');
  auto header = subs.substr(0, header_end);
  auto renamed = header;
  renamed.replace(renamed.find("demand_actual"), 13, "demand_metered");
  spit(dir.path() / "substations.csv", renamed + subs.substr(header_end));
  try {
    load_scenario(dir.path());
    FAIL("expected a schema error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("substations.csv") != std::string::npos);
    CHECK(msg.find("demand_actual") != std::string::npos);
  }

  // Negative demand on the first data row.
  auto body = subs;
  const auto row_start = header_end + 1;
  const auto row_end = body.find('\n', row_start);
  std::string row = body.substr(row_start, row_end - row_start);
  std::vector<std::string> cells;
  std::stringstream ss(row);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  std::size_t col = 0;
  {
    std::stringstream hs(header);
    std::string name;
    for (std::size_t i = 0; std::getline(hs, name, ','); ++i)
      if (name == "demand_actual") col = i;
  }
  cells[col] = "-3";
  std::string bad;
  for (std::size_t i = 0; i < cells.size(); ++i) bad += (i ? "," : "") + cells[i];
  spit(dir.path() / "substations.csv", body.replace(row_start, row_end - row_start, bad));
  try {
    load_scenario(dir.path());
    FAIL("expected a negative-value error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("demand_actual") != std::string::npos);
  }

  fs::remove(dir.path() / "agents.csv");
  CHECK_THROWS_AS(load_scenario(dir.path()), ValidationError);
}

TEST_CASE("gzip text I/O") {
  testing::TempDir dir;
  std::string text;
  for (int i = 0; i < 5000; ++i) text += "line " + std::to_string(i) + "\n";
  write_text_file(dir.path() / "x.txt.gz", text);
  CHECK(read_text_file(dir.path() / "x.txt.gz") == text);
  CHECK(fs::file_size(dir.path() / "x.txt.gz") < text.size());
  spit(dir.path() / "broken.gz", "not gzip at all");
  CHECK_THROWS_AS(read_text_file(dir.path() / "broken.gz"), ValidationError);
  CHECK_THROWS_AS(read_text_file(dir.path() / "absent.csv"), ValidationError);
}
