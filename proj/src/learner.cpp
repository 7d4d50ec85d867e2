#include "loadalloc/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "loadalloc/error.hpp"
#include "loadalloc/rng.hpp"
#include "loadalloc/stats.hpp"

namespace loadalloc {

namespace {

constexpr double kClampFloor = 1e-12;

std::vector<std::size_t> all_sources(const Scenario& scenario) {
  std::vector<std::size_t> out(scenario.regions().size());
  std::iota(out.begin(), out.end(), 0);
  return out;
}

// Softmax of -cost/tau over the members of one source, written into `w`.
void source_softmax(const CostModelParams& params, const FeatureTable& features,
                    std::span<const std::size_t> members, std::vector<double>& w) {
  w.resize(members.size());
  const double inv_tau = 1.0 / params.temperature;
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto phi = features.row(members[i]);
    double cost = params.weights[kFeatureCount];
    for (std::size_t f = 0; f < kFeatureCount; ++f) cost += params.weights[f] * phi[f];
    w[i] = -cost * inv_tau;
    peak = std::max(peak, w[i]);
  }
  double sum = 0.0;
  for (double& x : w) {
    x = std::exp(x - peak);
    sum += x;
  }
  for (double& x : w) x /= sum;
}

double source_landuse_kl(std::span<const double> w, std::span<const std::size_t> members, const Scenario& scenario,
                         const LandUseVector& q, LandUseVector* raw_out = nullptr, LandUseVector* clamped_out = nullptr) {
  LandUseVector raw{};
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& m = scenario.agents()[members[i]].landuse;
    for (std::size_t k = 0; k < kLandUseClasses; ++k) raw[k] += w[i] * m[k];
  }
  LandUseVector recon{};
  double total = 0.0;
  for (std::size_t k = 0; k < kLandUseClasses; ++k) {
    recon[k] = std::max(raw[k], kClampFloor);
    total += recon[k];
  }
  double kl = 0.0;
  for (std::size_t k = 0; k < kLandUseClasses; ++k) {
    if (q[k] > 0.0) kl += q[k] * std::log(q[k] / (recon[k] / total));
  }
  if (raw_out) *raw_out = raw;
  if (clamped_out) *clamped_out = recon;
  return kl;
}

double source_prior_kl(std::span<const double> w, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) kl += q[i] * std::log(q[i] / std::max(w[i], kClampFloor));
  }
  return kl;
}

bool has_target(std::span<const double> q) {
  return std::any_of(q.begin(), q.end(), [](double x) { return x > 0.0; });
}

std::size_t count_targets(const SourceWeights& targets, std::span<const std::size_t> sources) {
  std::size_t n = 0;
  for (std::size_t s : sources) n += has_target(targets[s]) ? 1 : 0;
  return n;
}

}  // namespace

FeatureTable agent_features(const Scenario& scenario, double prox_gamma) {
  const auto& agents = scenario.agents();
  FeatureTable table;
  table.rows = agents.size();
  table.values.assign(agents.size() * kFeatureCount, 0.0);
  const std::vector<double> prox = prox_scores(scenario, prox_gamma);
  for (std::size_t a = 0; a < agents.size(); ++a) {
    double* row = table.values.data() + a * kFeatureCount;
    for (std::size_t k = 0; k < kLandUseClasses; ++k) row[k] = agents[a].landuse[k];
    row[kNtlFeature] = std::log1p(agents[a].ntl);
    row[kProxFeature] = std::log1p(prox[a]);
  }
  for (std::size_t r = 0; r < scenario.regions().size(); ++r) {
    const auto members = scenario.region_agents(r);
    const auto n = static_cast<double>(members.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t a : members) {
      mx += agents[a].coords.x_km;
      my += agents[a].coords.y_km;
    }
    mx /= n;
    my /= n;
    double vx = 0.0, vy = 0.0;
    for (std::size_t a : members) {
      vx += (agents[a].coords.x_km - mx) * (agents[a].coords.x_km - mx);
      vy += (agents[a].coords.y_km - my) * (agents[a].coords.y_km - my);
    }
    const double sx = vx > 0.0 ? std::sqrt(vx / n) : 1.0;
    const double sy = vy > 0.0 ? std::sqrt(vy / n) : 1.0;
    for (std::size_t a : members) {
      double* row = table.values.data() + a * kFeatureCount;
      row[7] = (agents[a].coords.x_km - mx) / sx;
      row[8] = (agents[a].coords.y_km - my) / sy;
    }
  }
  return table;
}

void validate(const CostModelParams& params) {
  if (!(params.temperature > 0.0) || !std::isfinite(params.temperature))
    throw ValidationError("temperature must be positive");
  for (double w : params.weights) {
    if (!std::isfinite(w)) throw ValidationError("cost parameters must be finite");
  }
}

void validate(const TrainConfig& config) {
  if (!(config.lambda_ntl >= 0.0) || !(config.lambda_prox >= 0.0))
    throw ValidationError("prior weights must be >= 0");
  if (!(config.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (config.max_epochs < 0) throw ValidationError("max_epochs must be >= 0");
  if (!(config.convergence_tol >= 0.0)) throw ValidationError("convergence_tol must be >= 0");
  if (!(config.temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (!(config.init_scale >= 0.0)) throw ValidationError("init_scale must be >= 0");
}

SourceWeights allocation_weights(const CostModelParams& params, const FeatureTable& features,
                                 const Scenario& scenario) {
  validate(params);
  if (features.rows != scenario.agents().size()) throw ValidationError("feature table does not match scenario");
  SourceWeights out(scenario.regions().size());
  for (std::size_t r = 0; r < out.size(); ++r) source_softmax(params, features, scenario.region_agents(r), out[r]);
  return out;
}

double landuse_loss(const SourceWeights& weights, const Scenario& scenario, std::span<const std::size_t> sources) {
  std::vector<std::size_t> fallback;
  if (sources.empty()) {
    fallback = all_sources(scenario);
    sources = fallback;
  }
  double sum = 0.0;
  for (std::size_t s : sources) {
    sum += source_landuse_kl(weights[s], scenario.region_agents(s), scenario, scenario.regions()[s].consumption_shares);
  }
  return sum / static_cast<double>(sources.size());
}

double prior_loss(const SourceWeights& weights, const SourceWeights& targets, std::span<const std::size_t> sources) {
  if (weights.size() != targets.size()) throw ValidationError("prior targets do not match the weight layout");
  std::vector<std::size_t> fallback;
  if (sources.empty()) {
    fallback.resize(weights.size());
    std::iota(fallback.begin(), fallback.end(), 0);
    sources = fallback;
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t s : sources) {
    if (!has_target(targets[s])) continue;
    sum += source_prior_kl(weights[s], targets[s]);
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

TrainingProblem make_training_problem(const Scenario& scenario, std::span<const std::size_t> sources,
                                      double prox_gamma) {
  TrainingProblem problem;
  problem.scenario = &scenario;
  problem.features = agent_features(scenario, prox_gamma);
  std::vector<double> ntl(scenario.agents().size());
  for (std::size_t a = 0; a < ntl.size(); ++a) ntl[a] = scenario.agents()[a].ntl;
  problem.ntl_targets = prior_target(scenario, ntl);
  problem.prox_targets = prior_target(scenario, prox_scores(scenario, prox_gamma));
  if (sources.empty()) {
    problem.sources = all_sources(scenario);
  } else {
    problem.sources.assign(sources.begin(), sources.end());
    for (std::size_t s : problem.sources) {
      if (s >= scenario.regions().size()) throw ValidationError("training source out of range");
    }
  }
  return problem;
}

LossAndGradient total_loss(const CostModelParams& params, const TrainingProblem& problem, double lambda_ntl,
                           double lambda_prox) {
  const Scenario& scenario = *problem.scenario;
  LossAndGradient out;
  const auto n_sources = static_cast<double>(problem.sources.size());
  const std::size_t n_ntl = count_targets(problem.ntl_targets, problem.sources);
  const std::size_t n_prox = count_targets(problem.prox_targets, problem.sources);
  const double ntl_scale = n_ntl > 0 ? lambda_ntl / static_cast<double>(n_ntl) : 0.0;
  const double prox_scale = n_prox > 0 ? lambda_prox / static_cast<double>(n_prox) : 0.0;
  const double inv_tau = 1.0 / params.temperature;

  std::vector<double> w;
  std::vector<double> wg;  // w_i * dL/dw_i
  for (std::size_t s : problem.sources) {
    const auto members = scenario.region_agents(s);
    source_softmax(params, problem.features, members, w);
    const LandUseVector& q = scenario.regions()[s].consumption_shares;
    LandUseVector raw{}, recon{};
    out.loss.landuse += source_landuse_kl(w, members, scenario, q, &raw, &recon);

    // dKL/d(raw_k), zero where the clamp is active.
    double q_sum = 0.0, recon_sum = 0.0;
    for (std::size_t k = 0; k < kLandUseClasses; ++k) {
      q_sum += q[k];
      recon_sum += recon[k];
    }
    LandUseVector g_raw{};
    for (std::size_t k = 0; k < kLandUseClasses; ++k) {
      if (raw[k] > kClampFloor) g_raw[k] = (-q[k] / recon[k] + q_sum / recon_sum) / n_sources;
    }

    const auto& q_ntl = problem.ntl_targets[s];
    const auto& q_prox = problem.prox_targets[s];
    const bool use_ntl = ntl_scale > 0.0 && has_target(q_ntl);
    const bool use_prox = prox_scale > 0.0 && has_target(q_prox);
    if (has_target(q_ntl)) out.loss.ntl_prior += source_prior_kl(w, q_ntl);
    if (has_target(q_prox)) out.loss.prox_prior += source_prior_kl(w, q_prox);

    wg.assign(members.size(), 0.0);
    double wg_sum = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto& m = scenario.agents()[members[i]].landuse;
      double g = 0.0;
      for (std::size_t k = 0; k < kLandUseClasses; ++k) g += g_raw[k] * m[k];
      double v = w[i] * g;
      if (use_ntl && q_ntl[i] > 0.0 && w[i] > kClampFloor) v -= ntl_scale * q_ntl[i];
      if (use_prox && q_prox[i] > 0.0 && w[i] > kClampFloor) v -= prox_scale * q_prox[i];
      wg[i] = v;
      wg_sum += v;
    }
    // Softmax backprop: dL/dz_i = wg_i - w_i * sum_j wg_j, with z = -cost / tau.
    for (std::size_t i = 0; i < members.size(); ++i) {
      const double dz = wg[i] - w[i] * wg_sum;
      if (dz == 0.0) continue;
      const auto phi = problem.features.row(members[i]);
      for (std::size_t f = 0; f < kFeatureCount; ++f) out.gradient[f] -= dz * phi[f] * inv_tau;
      out.gradient[kFeatureCount] -= dz * inv_tau;
    }
  }
  out.loss.landuse /= n_sources;
  out.loss.ntl_prior = n_ntl > 0 ? out.loss.ntl_prior / static_cast<double>(n_ntl) : 0.0;
  out.loss.prox_prior = n_prox > 0 ? out.loss.prox_prior / static_cast<double>(n_prox) : 0.0;
  out.loss.total = out.loss.landuse + lambda_ntl * out.loss.ntl_prior + lambda_prox * out.loss.prox_prior;
  return out;
}

TrainedAllocator train(const Scenario& scenario, const TrainConfig& config, std::span<const std::size_t> sources) {
  const TrainingProblem problem = make_training_problem(scenario, sources, config.prox_gamma);
  return train(problem, config);
}

TrainedAllocator train(const TrainingProblem& problem, const TrainConfig& config) {
  validate(config);
  if (problem.sources.empty()) throw ValidationError("training needs at least one source");
  std::array<bool, kParamCount> active{};
  active.fill(true);
  if (!config.feature_fusion) {
    active[kNtlFeature] = false;
    active[kProxFeature] = false;
  }

  TrainedAllocator result;
  result.config = config;
  for (std::size_t s : problem.sources) result.train_region_ids.push_back(problem.scenario->regions()[s].id);
  result.params.temperature = config.temperature;
  result.params.init_seed = config.seed;
  Rng rng(config.seed);
  for (std::size_t p = 0; p < kParamCount; ++p) {
    const double draw = rng.normal();
    result.params.weights[p] = active[p] ? config.init_scale * draw : 0.0;
  }

  auto evaluate = [&](const CostModelParams& params) {
    LossAndGradient lg = total_loss(params, problem, config.lambda_ntl, config.lambda_prox);
    for (std::size_t p = 0; p < kParamCount; ++p) {
      if (!active[p]) lg.gradient[p] = 0.0;
      if (!std::isfinite(lg.gradient[p])) throw RuntimeError("training aborted: non-finite gradient");
    }
    if (!std::isfinite(lg.loss.total)) throw RuntimeError("training aborted: non-finite loss");
    return lg;
  };

  LossAndGradient current = evaluate(result.params);
  const double initial = current.loss.total;
  result.loss_trace.push_back(current.loss);

  constexpr int kMaxHalvings = 50;
  const double max_step = config.learning_rate * 64.0;
  double step = config.learning_rate;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    bool accepted = false;
    CostModelParams candidate = result.params;
    LossAndGradient next;
    for (int h = 0; h < kMaxHalvings; ++h) {
      for (std::size_t p = 0; p < kParamCount; ++p)
        candidate.weights[p] = result.params.weights[p] - step * current.gradient[p];
      next = evaluate(candidate);
      if (next.loss.total <= current.loss.total) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      result.converged = true;  // no descent direction left at machine precision
      break;
    }
    if (next.loss.total > 10.0 * initial && initial > 0.0) throw RuntimeError("training diverged");
    const double improvement = current.loss.total - next.loss.total;
    result.params = candidate;
    current = next;
    result.loss_trace.push_back(current.loss);
    if (improvement < config.convergence_tol) {
      result.converged = true;
      break;
    }
    step = std::min(2.0 * step, max_step);
  }
  return result;
}

CorrelationSummary probe_weight_factor_correlation(const SourceWeights& weights, const CorrectionFactorField& factors,
                                                   const Scenario& scenario) {
  if (weights.size() != scenario.regions().size()) throw ValidationError("weights must cover every source");
  CorrelationSummary out;
  std::vector<double> valid;
  for (std::size_t s = 0; s < weights.size(); ++s) {
    const auto members = scenario.region_agents(s);
    std::vector<double> f(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) f[i] = factors.factor[members[i]];
    const auto rho = spearman(weights[s], f);
    out.per_source.push_back(rho);
    if (rho) {
      valid.push_back(*rho);
    } else {
      ++out.n_missing;
    }
  }
  out.n_sources = weights.size();
  out.mean = valid.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(valid);
  out.std = sample_std(valid);
  return out;
}

}  // namespace loadalloc
