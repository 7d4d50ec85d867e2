#include "loadalloc/auxiliary.hpp"

#include <algorithm>
#include <cmath>

#include "loadalloc/error.hpp"

namespace loadalloc {

namespace {

std::vector<double> rci_values(const Scenario& scenario, std::span<const double> values) {
  std::vector<double> out;
  for (std::size_t a = 0; a < scenario.agents().size(); ++a) {
    if (is_rci(scenario.agents()[a])) out.push_back(values[a]);
  }
  return out;
}

void check_positive(const CorrectionFactorField& field) {
  for (double f : field.factor) {
    if (!(f > 0.0) || !std::isfinite(f)) throw RuntimeError("correction factor field is not strictly positive");
  }
}

}  // namespace

double lower_median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

CorrectionFactorField ntl_factor(const Scenario& scenario, double alpha) {
  const auto& agents = scenario.agents();
  std::vector<double> ntl(agents.size());
  for (std::size_t a = 0; a < agents.size(); ++a) ntl[a] = agents[a].ntl;

  CorrectionFactorField out;
  out.kind = FactorKind::Ntl;
  out.params.alpha = alpha;

  const std::vector<double> rci = rci_values(scenario, ntl);
  std::vector<double> lit;
  for (double v : rci) {
    if (v > 0.0) lit.push_back(v);
  }
  if (lit.empty()) {
    out.params.epsilon = 0.01;
    out.params.median = lower_median(ntl);
    out.params.degenerate_fallback = true;
  } else {
    out.params.epsilon = percentile(lit, 5.0);
    out.params.median = lower_median(rci);
  }
  if (!(out.params.median > 0.0)) throw RuntimeError("degenerate NTL field: reference median radiance is zero");

  const double denom = std::log1p(out.params.median);
  out.factor.resize(agents.size());
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const double base = std::log1p(ntl[a] + out.params.epsilon) / denom;
    out.factor[a] = alpha == 1.0 ? base : std::pow(base, alpha);
  }
  check_positive(out);
  return out;
}

double prox_score(const Agent& agent, std::span<const Substation> substations, double gamma) {
  if (substations.empty()) throw ValidationError("proximity needs at least one substation");
  if (!(gamma >= 0.0)) throw ValidationError("proximity decay exponent must be >= 0");
  double sum = 0.0;
  for (const Substation& s : substations) {
    const double d = std::max(distance_km(agent.coords, s.coords), kProximityClampKm);
    sum += gamma == 2.0 ? 1.0 / (d * d) : std::pow(d, -gamma);
  }
  return sum;
}

std::vector<double> prox_scores(const Scenario& scenario, double gamma) {
  std::vector<double> out(scenario.agents().size());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = prox_score(scenario.agents()[a], scenario.substations(), gamma);
  return out;
}

CorrectionFactorField prox_factor(const Scenario& scenario, double gamma) {
  const std::vector<double> prox = prox_scores(scenario, gamma);
  CorrectionFactorField out;
  out.kind = FactorKind::Proximity;
  out.params.gamma = gamma;
  std::vector<double> rci = rci_values(scenario, prox);
  if (rci.empty()) {
    rci = prox;
    out.params.degenerate_fallback = true;
  }
  out.params.median = lower_median(std::move(rci));
  const double denom = std::log1p(out.params.median);
  if (!(denom > 0.0) || !std::isfinite(denom)) throw RuntimeError("degenerate proximity median");
  out.factor.resize(prox.size());
  for (std::size_t a = 0; a < prox.size(); ++a) out.factor[a] = std::log1p(prox[a]) / denom;
  check_positive(out);
  return out;
}

CorrectionFactorField combine_factors(const CorrectionFactorField& f1, const CorrectionFactorField& f2, double beta) {
  if (f1.factor.size() != f2.factor.size()) throw ValidationError("factor fields cover different agent sets");
  CorrectionFactorField out;
  out.kind = FactorKind::Combined;
  out.params = f1.params;
  out.params.gamma = f2.params.gamma;
  out.params.beta = beta;
  out.factor.resize(f1.factor.size());
  for (std::size_t a = 0; a < out.factor.size(); ++a) {
    const double product = f1.factor[a] * f2.factor[a];
    out.factor[a] = beta == 1.0 ? product : std::pow(product, beta);
  }
  check_positive(out);
  return out;
}

SourceWeights prior_target(const Scenario& scenario, std::span<const double> values) {
  if (values.size() != scenario.agents().size()) throw ValidationError("auxiliary values do not cover every agent");
  SourceWeights out(scenario.regions().size());
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto members = scenario.region_agents(r);
    auto& q = out[r];
    q.assign(members.size(), 0.0);
    double sum = 0.0;
    std::size_t n_rci = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const std::size_t a = members[i];
      if (!is_rci(scenario.agents()[a])) continue;
      if (!(values[a] >= 0.0)) throw ValidationError("auxiliary values must be >= 0");
      q[i] = std::log1p(values[a]);
      sum += q[i];
      ++n_rci;
    }
    if (n_rci == 0) continue;
    if (sum > 0.0) {
      for (double& x : q) x /= sum;
    } else {
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (is_rci(scenario.agents()[members[i]])) q[i] = 1.0 / static_cast<double>(n_rci);
      }
    }
  }
  return out;
}

}  // namespace loadalloc
