#pragma once

#include <span>
#include <string>
#include <vector>

#include "loadalloc/model.hpp"

namespace loadalloc {

/// Agent-level demands (MVA) indexed like Scenario::agents().
struct AgentDemandField {
  std::vector<double> demand;
  std::string method_label;
  /// False for outputs that deliberately skip renormalization.
  bool conserving = true;
};

/// Largest |sum_a d_a - D_r| / D_r over regions.
double max_conservation_error(const AgentDemandField& field, const Scenario& scenario);

AgentDemandField weight_uniform(const Scenario& scenario);

/// Grid Point Model: each agent weighted by its region's consumption share of
/// the agent's dominant land-use class, normalized per region. Regions whose
/// raw weights are all zero fall back to a uniform split.
AgentDemandField weight_gpm(const Scenario& scenario);

/// Per-source allocation weights: weights[r] lists w over region_agents(r),
/// in the same order. Every source must be a distribution.
using SourceWeights = std::vector<std::vector<double>>;

AgentDemandField apply_weights(const SourceWeights& weights, const Scenario& scenario);

}  // namespace loadalloc
