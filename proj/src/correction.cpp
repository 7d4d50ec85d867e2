#include "loadalloc/correction.hpp"

#include <algorithm>
#include <cmath>

#include "loadalloc/error.hpp"
#include "loadalloc/rng.hpp"

namespace loadalloc {

namespace {

void check_inputs(const AgentDemandField& base, const CorrectionFactorField& factors, const Scenario& scenario) {
  if (base.demand.size() != scenario.agents().size()) throw ValidationError("base field does not cover every agent");
  if (factors.factor.size() != scenario.agents().size())
    throw ValidationError("factor field does not cover every agent");
  for (double f : factors.factor) {
    if (!(f > 0.0) || !std::isfinite(f)) throw ValidationError("correction factors must be positive and finite");
  }
}

bool constant_over(std::span<const std::size_t> members, const std::vector<double>& f) {
  const double first = f[members.front()];
  return std::all_of(members.begin(), members.end(), [&](std::size_t a) { return f[a] == first; });
}

std::string label(const AgentDemandField& base, const char* suffix) { return base.method_label + suffix; }

}  // namespace

void validate(const CorrectionConfig& config) {
  if (config.noise_repeats < 1) throw ValidationError("noise_repeats must be >= 1");
  if (!(config.additive_gain >= 0.0)) throw ValidationError("additive_gain must be >= 0");
}

AgentDemandField correct_multiplicative_renorm(const AgentDemandField& base, const CorrectionFactorField& factors,
                                               const Scenario& scenario) {
  check_inputs(base, factors, scenario);
  AgentDemandField out{base.demand, label(base, "+mult"), true};
  for (std::size_t r = 0; r < scenario.regions().size(); ++r) {
    const auto members = scenario.region_agents(r);
    if (constant_over(members, factors.factor)) continue;
    double mass = 0.0;
    for (std::size_t a : members) mass += base.demand[a] * factors.factor[a];
    if (!(mass > 0.0)) continue;  // all-zero base: nothing to redistribute
    const double scale = scenario.regions()[r].demand_total / mass;
    for (std::size_t a : members) out.demand[a] = base.demand[a] * factors.factor[a] * scale;
  }
  return out;
}

AgentDemandField correct_multiplicative_raw(const AgentDemandField& base, const CorrectionFactorField& factors,
                                            const Scenario& scenario) {
  check_inputs(base, factors, scenario);
  AgentDemandField out{base.demand, label(base, "+raw"), false};
  for (std::size_t a = 0; a < out.demand.size(); ++a) out.demand[a] = base.demand[a] * factors.factor[a];
  return out;
}

AgentDemandField correct_additive_renorm(const AgentDemandField& base, const CorrectionFactorField& factors,
                                         const Scenario& scenario, double gain) {
  check_inputs(base, factors, scenario);
  if (!(gain >= 0.0)) throw ValidationError("additive gain must be >= 0");
  const double kappa = std::isinf(gain) ? 1.0 : std::clamp(gain / (1.0 + gain), 0.0, 1.0);
  AgentDemandField out{base.demand, label(base, "+add"), true};
  if (kappa == 0.0) return out;
  for (std::size_t r = 0; r < scenario.regions().size(); ++r) {
    const auto members = scenario.region_agents(r);
    const double total = scenario.regions()[r].demand_total;
    double factor_sum = 0.0;
    for (std::size_t a : members) factor_sum += factors.factor[a];
    for (std::size_t a : members) {
      const double share = (1.0 - kappa) * base.demand[a] / total + kappa * factors.factor[a] / factor_sum;
      out.demand[a] = total * share;
    }
  }
  return out;
}

CorrectionFactorField lognormal_noise_field(std::size_t n_agents, double log_mean, double log_sd,
                                            std::uint64_t seed) {
  CorrectionFactorField out;
  out.kind = FactorKind::Noise;
  out.params.noise_seed = seed;
  out.factor.resize(n_agents);
  Rng rng(seed);
  for (double& f : out.factor) f = std::exp(log_mean + log_sd * rng.normal());
  return out;
}

std::vector<AgentDemandField> correct_noise_renorm(const AgentDemandField& base, const Scenario& scenario,
                                                   const CorrectionFactorField& reference,
                                                   const CorrectionConfig& config) {
  validate(config);
  const std::size_t n = scenario.agents().size();
  if (reference.factor.size() != n) throw ValidationError("reference factor field does not cover every agent");
  double mean = 0.0;
  for (double f : reference.factor) mean += std::log(f);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double f : reference.factor) var += (std::log(f) - mean) * (std::log(f) - mean);
  const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;

  std::vector<AgentDemandField> out;
  out.reserve(static_cast<std::size_t>(config.noise_repeats));
  for (int k = 0; k < config.noise_repeats; ++k) {
    const auto noise = lognormal_noise_field(n, mean, sd, derive_seed(config.noise_seed, static_cast<std::uint64_t>(k)));
    AgentDemandField field = correct_multiplicative_renorm(base, noise, scenario);
    field.method_label = base.method_label + "+noise";
    out.push_back(std::move(field));
  }
  return out;
}

}  // namespace loadalloc
