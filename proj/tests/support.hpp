#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "loadalloc/model.hpp"
#include "loadalloc/rng.hpp"

namespace testing {

using namespace loadalloc;

inline LandUseVector random_landuse(Rng& rng) {
  LandUseVector v{};
  double sum = 0.0;
  for (auto& x : v) {
    x = -std::log(1.0 - rng.uniform());
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

// Small random world. Some NTL readings are zero so the dark-pixel path is hit.
inline Scenario random_scenario(std::uint64_t seed, int n_regions = 3, int agents = 40, int subs = 5) {
  Rng rng(seed);
  std::vector<Region> regions;
  std::vector<Agent> all_agents;
  std::vector<Substation> substations;
  Id next_agent = 1;
  Id next_sub = 1;
  for (int r = 0; r < n_regions; ++r) {
    Region region;
    region.id = r + 1;
    region.demand_total = rng.uniform(50.0, 500.0);
    region.consumption_shares = random_landuse(rng);
    region.area_km2 = 100.0;
    regions.push_back(region);
    const double x0 = 20.0 * r;
    for (int a = 0; a < agents; ++a) {
      Agent agent;
      agent.id = next_agent++;
      agent.coords = {x0 + rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)};
      agent.landuse = random_landuse(rng);
      agent.ntl = rng.uniform() < 0.15 ? 0.0 : rng.uniform(0.0, 267.0);
      agent.region_id = region.id;
      all_agents.push_back(agent);
    }
    double total = 0.0;
    std::vector<double> raw;
    for (int j = 0; j < subs; ++j) {
      raw.push_back(rng.uniform(0.1, 1.0));
      total += raw.back();
    }
    for (int j = 0; j < subs; ++j) {
      Substation s;
      s.id = next_sub++;
      s.coords = {x0 + rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)};
      s.demand_actual = region.demand_total * raw[j] / total;
      s.region_id = region.id;
      substations.push_back(s);
    }
  }
  return Scenario(std::move(regions), std::move(all_agents), std::move(substations));
}

inline std::vector<double> region_sums(std::span<const double> agent_values, const Scenario& s) {
  std::vector<double> sums(s.regions().size(), 0.0);
  for (std::size_t a = 0; a < agent_values.size(); ++a) sums[s.agent_region(a)] += agent_values[a];
  return sums;
}

inline double max_relative_gap(std::span<const double> agent_values, const Scenario& s) {
  const auto sums = region_sums(agent_values, s);
  double worst = 0.0;
  for (std::size_t r = 0; r < sums.size(); ++r)
    worst = std::max(worst, std::abs(sums[r] - s.regions()[r].demand_total) / s.regions()[r].demand_total);
  return worst;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "tmp") {
    path_ = std::filesystem::temp_directory_path() /
            ("loadalloc_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
