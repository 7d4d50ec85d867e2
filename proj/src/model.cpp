#include "loadalloc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "loadalloc/error.hpp"

namespace loadalloc {

namespace {

constexpr double kShareTolerance = 1e-9;

void check_share_vector(const LandUseVector& v, const std::string& what) {
  double sum = 0.0;
  for (double p : v) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError(what + ": negative or non-finite proportion");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kShareTolerance) throw ValidationError(what + ": proportions do not sum to 1");
}

}  // namespace

double distance_km(Point a, Point b) { return std::hypot(a.x_km - b.x_km, a.y_km - b.y_km); }

LandUse dominant_class(const LandUseVector& landuse) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kLandUseClasses; ++k) {
    if (landuse[k] > landuse[best]) best = k;
  }
  return static_cast<LandUse>(best);
}

bool is_rci(const Agent& agent) {
  const LandUse k = dominant_class(agent.landuse);
  return k == LandUse::Residential || k == LandUse::Commercial || k == LandUse::Industrial;
}

Scenario::Scenario(std::vector<Region> regions, std::vector<Agent> agents, std::vector<Substation> substations)
    : regions_(std::move(regions)), agents_(std::move(agents)), substations_(std::move(substations)) {
  if (regions_.empty()) throw ValidationError("scenario has no regions");
  for (std::size_t r = 0; r < regions_.size(); ++r) {
    const Region& region = regions_[r];
    const std::string tag = "region " + std::to_string(region.id);
    if (!region_lookup_.emplace(region.id, r).second) throw ValidationError(tag + ": duplicate id");
    if (!(region.demand_total > 0.0) || !std::isfinite(region.demand_total))
      throw ValidationError(tag + ": demand_total must be positive");
    if (!(region.area_km2 > 0.0) || !std::isfinite(region.area_km2))
      throw ValidationError(tag + ": area must be positive");
    check_share_vector(region.consumption_shares, tag + " consumption_shares");
  }
  region_agents_.resize(regions_.size());
  region_substations_.resize(regions_.size());

  agent_region_.reserve(agents_.size());
  for (std::size_t a = 0; a < agents_.size(); ++a) {
    const Agent& agent = agents_[a];
    const std::string tag = "agent " + std::to_string(agent.id);
    if (!agent_lookup_.emplace(agent.id, a).second) throw ValidationError(tag + ": duplicate id");
    if (!std::isfinite(agent.ntl) || agent.ntl < 0.0) throw ValidationError(tag + ": ntl must be >= 0");
    if (!std::isfinite(agent.coords.x_km) || !std::isfinite(agent.coords.y_km))
      throw ValidationError(tag + ": non-finite coordinates");
    check_share_vector(agent.landuse, tag + " landuse");
    auto it = region_lookup_.find(agent.region_id);
    if (it == region_lookup_.end())
      throw ValidationError(tag + ": unknown region_id " + std::to_string(agent.region_id));
    region_agents_[it->second].push_back(a);
    agent_region_.push_back(it->second);
  }

  substation_region_.reserve(substations_.size());
  for (std::size_t j = 0; j < substations_.size(); ++j) {
    const Substation& sub = substations_[j];
    const std::string tag = "substation " + std::to_string(sub.id);
    if (!substation_lookup_.emplace(sub.id, j).second) throw ValidationError(tag + ": duplicate id");
    if (!std::isfinite(sub.demand_actual) || sub.demand_actual < 0.0)
      throw ValidationError(tag + ": demand_actual must be >= 0");
    if (!std::isfinite(sub.coords.x_km) || !std::isfinite(sub.coords.y_km))
      throw ValidationError(tag + ": non-finite coordinates");
    auto it = region_lookup_.find(sub.region_id);
    if (it == region_lookup_.end())
      throw ValidationError(tag + ": unknown region_id " + std::to_string(sub.region_id));
    region_substations_[it->second].push_back(j);
    substation_region_.push_back(it->second);
  }

  for (std::size_t r = 0; r < regions_.size(); ++r) {
    if (region_agents_[r].empty())
      throw ValidationError("region " + std::to_string(regions_[r].id) + " contains no agents");
    if (region_substations_[r].empty())
      throw ValidationError("region " + std::to_string(regions_[r].id) + " contains no substations");
  }
}

std::size_t Scenario::region_index(Id region_id) const {
  auto it = region_lookup_.find(region_id);
  if (it == region_lookup_.end()) throw ValidationError("unknown region id " + std::to_string(region_id));
  return it->second;
}

std::size_t Scenario::agent_index(Id agent_id) const {
  auto it = agent_lookup_.find(agent_id);
  if (it == agent_lookup_.end()) throw ValidationError("unknown agent id " + std::to_string(agent_id));
  return it->second;
}

std::size_t Scenario::substation_index(Id substation_id) const {
  auto it = substation_lookup_.find(substation_id);
  if (it == substation_lookup_.end())
    throw ValidationError("unknown substation id " + std::to_string(substation_id));
  return it->second;
}

Scenario Scenario::with_substation_demands(std::span<const double> demands) const {
  if (demands.size() != substations_.size()) throw ValidationError("substation demand vector has wrong length");
  std::vector<Substation> subs = substations_;
  for (std::size_t j = 0; j < subs.size(); ++j) subs[j].demand_actual = demands[j];
  return Scenario(regions_, agents_, std::move(subs));
}

VoronoiAssignment assign_voronoi(const Scenario& scenario) {
  const auto& agents = scenario.agents();
  const auto& subs = scenario.substations();
  VoronoiAssignment out;
  out.agent_to_substation.resize(agents.size());
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const auto candidates = scenario.region_substations(scenario.agent_region(a));
    std::size_t best = candidates.front();
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j : candidates) {
      const double dx = agents[a].coords.x_km - subs[j].coords.x_km;
      const double dy = agents[a].coords.y_km - subs[j].coords.y_km;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2 || (d2 == best_d2 && subs[j].id < subs[best].id)) {
        best = j;
        best_d2 = d2;
      }
    }
    out.agent_to_substation[a] = best;
  }
  return out;
}

std::vector<double> aggregate_to_substations(std::span<const double> agent_demands,
                                             const VoronoiAssignment& assignment, const Scenario& scenario) {
  if (agent_demands.size() != scenario.agents().size())
    throw ValidationError("agent demand vector does not cover every agent");
  if (assignment.agent_to_substation.size() != scenario.agents().size())
    throw ValidationError("Voronoi assignment does not cover every agent");
  std::vector<double> out(scenario.substations().size(), 0.0);
  for (std::size_t a = 0; a < agent_demands.size(); ++a) {
    const double d = agent_demands[a];
    if (!std::isfinite(d) || d < 0.0) throw ValidationError("agent demand must be finite and >= 0");
    out[assignment.agent_to_substation[a]] += d;
  }
  return out;
}

}  // namespace loadalloc
