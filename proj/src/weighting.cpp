#include "loadalloc/weighting.hpp"

#include <algorithm>
#include <cmath>

#include "loadalloc/error.hpp"

namespace loadalloc {

double max_conservation_error(const AgentDemandField& field, const Scenario& scenario) {
  double worst = 0.0;
  for (std::size_t r = 0; r < scenario.regions().size(); ++r) {
    double sum = 0.0;
    for (std::size_t a : scenario.region_agents(r)) sum += field.demand[a];
    const double total = scenario.regions()[r].demand_total;
    worst = std::max(worst, std::abs(sum - total) / total);
  }
  return worst;
}

AgentDemandField weight_uniform(const Scenario& scenario) {
  AgentDemandField out{std::vector<double>(scenario.agents().size(), 0.0), "Uniform", true};
  for (std::size_t r = 0; r < scenario.regions().size(); ++r) {
    const auto members = scenario.region_agents(r);
    const double share = scenario.regions()[r].demand_total / static_cast<double>(members.size());
    for (std::size_t a : members) out.demand[a] = share;
  }
  return out;
}

AgentDemandField weight_gpm(const Scenario& scenario) {
  AgentDemandField out{std::vector<double>(scenario.agents().size(), 0.0), "GPM", true};
  for (std::size_t r = 0; r < scenario.regions().size(); ++r) {
    const Region& region = scenario.regions()[r];
    const auto members = scenario.region_agents(r);
    double total_weight = 0.0;
    for (std::size_t a : members) {
      const auto k = static_cast<std::size_t>(dominant_class(scenario.agents()[a].landuse));
      out.demand[a] = region.consumption_shares[k];
      total_weight += out.demand[a];
    }
    if (total_weight > 0.0) {
      for (std::size_t a : members) out.demand[a] = region.demand_total * out.demand[a] / total_weight;
    } else {
      const double share = region.demand_total / static_cast<double>(members.size());
      for (std::size_t a : members) out.demand[a] = share;
    }
  }
  return out;
}

AgentDemandField apply_weights(const SourceWeights& weights, const Scenario& scenario) {
  if (weights.size() != scenario.regions().size())
    throw ValidationError("allocation weights must cover every source");
  AgentDemandField out{std::vector<double>(scenario.agents().size(), 0.0), "Learned", true};
  for (std::size_t r = 0; r < weights.size(); ++r) {
    const auto members = scenario.region_agents(r);
    const auto& w = weights[r];
    if (w.size() != members.size())
      throw ValidationError("allocation weights for region " + std::to_string(scenario.regions()[r].id) +
                            " do not match its agent count");
    double sum = 0.0;
    for (double x : w) {
      if (!std::isfinite(x) || x < 0.0) throw ValidationError("allocation weight must be finite and >= 0");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError("allocation weights for region " + std::to_string(scenario.regions()[r].id) +
                            " do not sum to 1");
    const double total = scenario.regions()[r].demand_total;
    for (std::size_t i = 0; i < members.size(); ++i) out.demand[members[i]] = w[i] * total;
  }
  return out;
}

}  // namespace loadalloc
