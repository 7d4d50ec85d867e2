#pragma once

#include <cstdint>
#include <vector>

#include "loadalloc/auxiliary.hpp"
#include "loadalloc/weighting.hpp"

namespace loadalloc {

enum class CorrectionMode { MultiplicativeRenorm, MultiplicativeRaw, AdditiveRenorm, NoiseRenorm };

struct CorrectionConfig {
  CorrectionMode mode = CorrectionMode::MultiplicativeRenorm;
  int noise_repeats = 10;
  std::uint64_t noise_seed = 0;
  double additive_gain = 1.0;
};

void validate(const CorrectionConfig& config);

/// d'_a = D_r * d_a f(a) / sum_{a' in r} d_a' f(a'). Regions where the factor
/// is constant are copied through unchanged; regions with zero base mass stay
/// zero.
AgentDemandField correct_multiplicative_renorm(const AgentDemandField& base, const CorrectionFactorField& factors,
                                               const Scenario& scenario);

/// d'_a = d_a f(a). The result is tagged non-conserving.
AgentDemandField correct_multiplicative_raw(const AgentDemandField& base, const CorrectionFactorField& factors,
                                            const Scenario& scenario);

/// Convex blend of base shares and factor shares with weight
/// kappa = gain / (1 + gain).
AgentDemandField correct_additive_renorm(const AgentDemandField& base, const CorrectionFactorField& factors,
                                         const Scenario& scenario, double gain = 1.0);

/// Log-normal factors matched to the log-mean and log-variance of
/// `reference` (the real combined field), one renormalized output per repeat.
std::vector<AgentDemandField> correct_noise_renorm(const AgentDemandField& base, const Scenario& scenario,
                                                   const CorrectionFactorField& reference,
                                                   const CorrectionConfig& config);

/// Log-normal noise field with the given log-moments.
CorrectionFactorField lognormal_noise_field(std::size_t n_agents, double log_mean, double log_sd,
                                            std::uint64_t seed);

}  // namespace loadalloc
