#include "loadalloc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include "loadalloc/error.hpp"
#include "loadalloc/rng.hpp"
#include "loadalloc/scenario.hpp"
#include "loadalloc/weighting.hpp"
#include "text_format.hpp"

namespace loadalloc {

namespace {

// Runs fn(0..n-1) on a bounded pool. The first failure (by job index) is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string fmt_level(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

void validate(const MethodSpec& spec) {
  const std::string tag = "method " + spec.name + ": ";
  if (spec.integration == Integration::None && (spec.use_ntl || spec.use_prox))
    throw ValidationError(tag + "auxiliary data given without an integration path");
  if (spec.integration != Integration::None && !spec.use_ntl && !spec.use_prox)
    throw ValidationError(tag + "integration needs NTL, Proximity or both");
  if (spec.integration == Integration::PriorLoss && spec.base != BaseKind::Learned)
    throw ValidationError(tag + "prior loss requires the learned base");
  if (!(spec.alpha >= 0.0) || !(spec.gamma >= 0.0) || !(spec.beta >= 0.0))
    throw ValidationError(tag + "intensity parameters must be >= 0");
  if (spec.lambda && !(*spec.lambda >= 0.0)) throw ValidationError(tag + "lambda must be >= 0");
  if (!(spec.additive_gain >= 0.0)) throw ValidationError(tag + "additive gain must be >= 0");
  if (spec.noise_repeats < 1) throw ValidationError(tag + "noise_repeats must be >= 1");
}

MethodSpec parse_method(const std::string& name) {
  MethodSpec spec;
  spec.name = name;
  std::string rest;
  if (starts_with(name, "Uni")) {
    spec.base = BaseKind::Uniform;
    rest = name.substr(3);
  } else if (starts_with(name, "GPM")) {
    spec.base = BaseKind::Gpm;
    rest = name.substr(3);
  } else if (starts_with(name, "GNN")) {
    spec.base = BaseKind::Learned;
    rest = name.substr(3);
  } else {
    throw ValidationError("unknown method '" + name + "'");
  }
  if (rest.empty()) return spec;

  static const std::vector<std::pair<std::string, Integration>> modes{
      {"post", Integration::PostMultiplicative}, {"raw", Integration::PostMultiplicativeRaw},
      {"add", Integration::PostAdditive},        {"noise", Integration::PostNoise},
      {"prior", Integration::PriorLoss}};
  bool matched = false;
  for (const auto& [prefix, mode] : modes) {
    if (starts_with(rest, prefix)) {
      spec.integration = mode;
      rest = rest.substr(prefix.size());
      matched = true;
      break;
    }
  }
  // The uniform rows of the method matrix omit "post" (UniP, UniN, UniNP).
  if (!matched) {
    if (spec.base != BaseKind::Uniform) throw ValidationError("unknown method '" + name + "'");
    spec.integration = Integration::PostMultiplicative;
  }
  if (rest == "N") {
    spec.use_ntl = true;
  } else if (rest == "P") {
    spec.use_prox = true;
  } else if (rest == "NP") {
    spec.use_ntl = spec.use_prox = true;
  } else {
    throw ValidationError("unknown method '" + name + "'");
  }
  validate(spec);
  return spec;
}

std::vector<std::string> method_matrix_names() {
  return {"Uni",      "UniP",      "UniN",     "UniNP",     "GPM",       "GPMpostP",  "GPMpostN",  "GPMpostNP",
          "GNN",      "GNNpostP",  "GNNpostN", "GNNpostNP", "GNNpriorP", "GNNpriorN", "GNNpriorNP"};
}

std::vector<std::string> isolation_method_names() {
  return {"GNNrawNP", "GNNrawN", "GNNrawP", "GNNnoiseNP", "GNNaddNP", "GNNaddN", "GNNaddP"};
}

TrainConfig training_config(const MethodSpec& spec, const TrainConfig& base) {
  TrainConfig c = base;
  if (spec.integration == Integration::PriorLoss) {
    c.lambda_ntl = spec.use_ntl ? spec.lambda.value_or(base.lambda_ntl) : 0.0;
    c.lambda_prox = spec.use_prox ? spec.lambda.value_or(base.lambda_prox) : 0.0;
  } else {
    c.lambda_ntl = 0.0;
    c.lambda_prox = 0.0;
  }
  return c;
}

std::string training_key(const TrainConfig& config) {
  if (config.lambda_ntl == 0.0 && config.lambda_prox == 0.0) return "plain";
  std::string key = "prior";
  if (config.lambda_ntl > 0.0) key += "-ntl" + fmt_level(config.lambda_ntl);
  if (config.lambda_prox > 0.0) key += "-prox" + fmt_level(config.lambda_prox);
  return key;
}

// ------------------------------------------------------------ pipeline context

PipelineContext::PipelineContext(const Scenario& scenario)
    : scenario_(&scenario), assignment_(assign_voronoi(scenario)) {}

const FeatureTable& PipelineContext::features(double prox_gamma) const {
  std::lock_guard lock(mutex_);
  auto& slot = features_[prox_gamma];
  if (!slot) slot = std::make_unique<FeatureTable>(agent_features(*scenario_, prox_gamma));
  return *slot;
}

const CorrectionFactorField& PipelineContext::ntl(double alpha) const {
  // Caller holds the lock.
  auto& slot = ntl_[alpha];
  if (!slot) slot = std::make_unique<CorrectionFactorField>(ntl_factor(*scenario_, alpha));
  return *slot;
}

const CorrectionFactorField& PipelineContext::prox(double gamma) const {
  auto& slot = prox_[gamma];
  if (!slot) slot = std::make_unique<CorrectionFactorField>(prox_factor(*scenario_, gamma));
  return *slot;
}

const CorrectionFactorField& PipelineContext::factor(const MethodSpec& spec) const {
  std::lock_guard lock(mutex_);
  if (spec.use_ntl && !spec.use_prox) return ntl(spec.alpha);
  if (spec.use_prox && !spec.use_ntl) return prox(spec.gamma);
  if (!spec.use_ntl && !spec.use_prox) throw ValidationError("method " + spec.name + " has no correction factor");
  const std::string key = fmt_level(spec.alpha) + "/" + fmt_level(spec.gamma) + "/" + fmt_level(spec.beta);
  auto& slot = combined_[key];
  if (!slot) slot = std::make_unique<CorrectionFactorField>(combine_factors(ntl(spec.alpha), prox(spec.gamma), spec.beta));
  return *slot;
}

// ------------------------------------------------------------ single method

MethodOutput run_method(const MethodSpec& spec, const PipelineContext& context, const TrainedAllocator* trained,
                        std::uint64_t noise_seed) {
  validate(spec);
  const Scenario& scenario = context.scenario();
  AgentDemandField base;
  switch (spec.base) {
    case BaseKind::Uniform:
      base = weight_uniform(scenario);
      break;
    case BaseKind::Gpm:
      base = weight_gpm(scenario);
      break;
    case BaseKind::Learned: {
      if (!trained) throw ValidationError("method " + spec.name + " needs a trained allocator");
      const auto weights =
          allocation_weights(trained->params, context.features(trained->config.prox_gamma), scenario);
      base = apply_weights(weights, scenario);
      break;
    }
  }

  std::vector<AgentDemandField> fields;
  switch (spec.integration) {
    case Integration::None:
    case Integration::PriorLoss:  // priors act during training only
      fields.push_back(std::move(base));
      break;
    case Integration::PostMultiplicative:
      fields.push_back(correct_multiplicative_renorm(base, context.factor(spec), scenario));
      break;
    case Integration::PostMultiplicativeRaw:
      fields.push_back(correct_multiplicative_raw(base, context.factor(spec), scenario));
      break;
    case Integration::PostAdditive:
      fields.push_back(correct_additive_renorm(base, context.factor(spec), scenario, spec.additive_gain));
      break;
    case Integration::PostNoise: {
      CorrectionConfig cfg;
      cfg.mode = CorrectionMode::NoiseRenorm;
      cfg.noise_repeats = spec.noise_repeats;
      cfg.noise_seed = noise_seed;
      fields = correct_noise_renorm(base, scenario, context.factor(spec), cfg);
      break;
    }
  }

  MethodOutput out;
  for (const auto& f : fields) {
    out.conserving = out.conserving && f.conserving;
    out.substation_demand.push_back(aggregate_to_substations(f.demand, context.assignment(), scenario));
  }
  return out;
}

MethodOutput run_method(const MethodSpec& spec, const Scenario& scenario, const TrainedAllocator* trained,
                        std::uint64_t noise_seed) {
  const PipelineContext context(scenario);
  return run_method(spec, context, trained, noise_seed);
}

std::vector<RegionMetrics> evaluate_output(const MethodOutput& output, const Scenario& scenario) {
  if (output.substation_demand.empty()) throw ValidationError("method produced no predictions");
  std::vector<RegionMetrics> mean_metrics = scenario_metrics(output.substation_demand.front(), scenario);
  if (output.substation_demand.size() == 1) return mean_metrics;
  const auto reps = static_cast<double>(output.substation_demand.size());
  std::vector<std::size_t> corr_count(mean_metrics.size(), 0);
  for (auto& m : mean_metrics) m = {m.region_id, 0.0, 0.0, std::nullopt};
  std::vector<double> corr_sum(mean_metrics.size(), 0.0);
  for (const auto& pred : output.substation_demand) {
    const auto m = scenario_metrics(pred, scenario);
    for (std::size_t r = 0; r < m.size(); ++r) {
      mean_metrics[r].rmse += m[r].rmse / reps;
      mean_metrics[r].mae += m[r].mae / reps;
      if (m[r].corr) {
        corr_sum[r] += *m[r].corr;
        ++corr_count[r];
      }
    }
  }
  for (std::size_t r = 0; r < mean_metrics.size(); ++r) {
    if (mean_metrics[r].mae > mean_metrics[r].rmse) mean_metrics[r].mae = mean_metrics[r].rmse;
    if (corr_count[r] > 0) mean_metrics[r].corr = corr_sum[r] / static_cast<double>(corr_count[r]);
  }
  return mean_metrics;
}

double prediction_conservation_error(const MethodOutput& output, const Scenario& scenario) {
  double worst = 0.0;
  for (const auto& pred : output.substation_demand) {
    for (std::size_t r = 0; r < scenario.regions().size(); ++r) {
      double sum = 0.0;
      for (std::size_t j : scenario.region_substations(r)) sum += pred[j];
      const double d = scenario.regions()[r].demand_total;
      worst = std::max(worst, std::abs(sum - d) / d);
    }
  }
  return worst;
}

// ------------------------------------------------------------ cross-validation

void validate(const CVPlan& plan, std::size_t n_regions) {
  if (plan.seeds.empty()) throw ValidationError("plan needs at least one seed");
  if (std::set<std::uint64_t>(plan.seeds.begin(), plan.seeds.end()).size() != plan.seeds.size())
    throw ValidationError("plan seeds must be distinct");
  if (plan.single_pass) return;
  if (plan.n_folds < 2) throw ValidationError("cross-validation needs at least two folds");
  if (n_regions < static_cast<std::size_t>(plan.n_folds))
    throw ValidationError("a fold would have zero regions: " + std::to_string(n_regions) + " regions, " +
                          std::to_string(plan.n_folds) + " folds");
}

std::vector<std::vector<std::size_t>> fold_assignment(std::size_t n_regions, int n_folds, std::uint64_t seed) {
  if (n_folds < 1 || n_regions < static_cast<std::size_t>(n_folds))
    throw ValidationError("a fold would have zero regions");
  std::vector<std::size_t> order(n_regions);
  for (std::size_t i = 0; i < n_regions; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0xF01D));
  for (std::size_t i = n_regions; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(n_folds));
  for (std::size_t i = 0; i < n_regions; ++i) folds[i % folds.size()].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

namespace {

struct FoldSplit {
  std::uint64_t seed = 0;
  int fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<FoldSplit> make_splits(const CVPlan& plan, std::size_t n_regions) {
  validate(plan, n_regions);
  std::vector<FoldSplit> splits;
  for (std::uint64_t seed : plan.seeds) {
    if (plan.single_pass) {
      FoldSplit s{seed, 0, {}, {}};
      for (std::size_t r = 0; r < n_regions; ++r) s.train.push_back(r);
      s.test = s.train;
      splits.push_back(std::move(s));
      continue;
    }
    const auto folds = fold_assignment(n_regions, plan.n_folds, seed);
    for (int f = 0; f < plan.n_folds; ++f) {
      FoldSplit s{seed, f, {}, folds[static_cast<std::size_t>(f)]};
      for (int g = 0; g < plan.n_folds; ++g) {
        if (g != f) s.train.insert(s.train.end(), folds[static_cast<std::size_t>(g)].begin(), folds[static_cast<std::size_t>(g)].end());
      }
      std::sort(s.train.begin(), s.train.end());
      splits.push_back(std::move(s));
    }
  }
  if (!plan.only.empty()) {
    std::erase_if(splits, [&](const FoldSplit& s) {
      return std::find(plan.only.begin(), plan.only.end(), std::make_pair(s.seed, s.fold)) == plan.only.end();
    });
    if (splits.empty()) throw ValidationError("plan filter selects no (seed, fold) pair");
  }
  return splits;
}

std::vector<Id> region_ids(const Scenario& scenario, const std::vector<std::size_t>& positions) {
  std::vector<Id> ids;
  for (std::size_t p : positions) ids.push_back(scenario.regions()[p].id);
  return ids;
}

struct TrainJob {
  std::size_t split = 0;
  std::string key;
  TrainConfig config;
};

std::filesystem::path model_path(const std::filesystem::path& dir, std::uint64_t seed, int fold,
                                 const std::string& key) {
  return dir / ("model_s" + std::to_string(seed) + "_f" + std::to_string(fold) + "_" + key + ".json");
}

// Trains (or reloads) every model needed; result indexed like `jobs`.
std::vector<TrainedAllocator> run_training(const std::vector<TrainJob>& jobs, const std::vector<FoldSplit>& splits,
                                           const Scenario& scenario, const CVOptions& options) {
  std::vector<TrainedAllocator> models(jobs.size());
  // One feature/target build per distinct gamma would be cheaper, but problems
  // differ by source set anyway.
  parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
    const TrainJob& job = jobs[i];
    const FoldSplit& split = splits[job.split];
    const auto expected_ids = region_ids(scenario, split.train);
    if (options.model_dir) {
      const auto path = model_path(*options.model_dir, split.seed, split.fold, job.key);
      if (std::filesystem::exists(path)) {
        TrainedAllocator cached = trained_allocator_from_json(read_text_file(path));
        if (cached.train_region_ids == expected_ids && training_key(cached.config) == job.key &&
            cached.config.seed == job.config.seed) {
          models[i] = std::move(cached);
          return;
        }
      }
    }
    models[i] = train(scenario, job.config, split.train);
    if (options.model_dir) write_text_file(model_path(*options.model_dir, split.seed, split.fold, job.key), to_json(models[i]));
  });
  return models;
}

std::vector<TrainJob> plan_training(const std::vector<FoldSplit>& splits, const std::vector<MethodSpec>& specs,
                                    const TrainConfig& base, std::map<std::pair<std::size_t, std::string>, std::size_t>& index) {
  std::vector<TrainJob> jobs;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (const auto& spec : specs) {
      if (spec.base != BaseKind::Learned) continue;
      TrainConfig cfg = training_config(spec, base);
      cfg.seed = derive_seed(splits[s].seed, static_cast<std::uint64_t>(splits[s].fold));
      const std::string key = training_key(cfg);
      if (index.emplace(std::make_pair(s, key), jobs.size()).second) jobs.push_back({s, key, cfg});
    }
  }
  return jobs;
}

void check_specs(const std::vector<MethodSpec>& specs) {
  if (specs.empty()) throw ValidationError("no methods to evaluate");
  std::set<std::string> names;
  for (const auto& spec : specs) {
    validate(spec);
    if (!names.insert(spec.name).second) throw ValidationError("duplicate method name " + spec.name);
  }
}

}  // namespace

std::vector<TrainedModel> train_models(const CVPlan& plan, const Scenario& scenario,
                                       const std::vector<MethodSpec>& specs, const CVOptions& options) {
  check_specs(specs);
  validate(options.train);
  const auto splits = make_splits(plan, scenario.regions().size());
  std::map<std::pair<std::size_t, std::string>, std::size_t> index;
  const auto jobs = plan_training(splits, specs, options.train, index);
  auto models = run_training(jobs, splits, scenario, options);
  std::vector<TrainedModel> out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& split = splits[jobs[i].split];
    out.push_back({split.seed, split.fold, jobs[i].key, std::move(models[i])});
  }
  return out;
}

CVResult run_cv(const CVPlan& plan, const Scenario& scenario, const std::vector<MethodSpec>& specs,
                const CVOptions& options) {
  check_specs(specs);
  validate(options.train);
  const auto splits = make_splits(plan, scenario.regions().size());
  std::map<std::pair<std::size_t, std::string>, std::size_t> index;
  const auto jobs = plan_training(splits, specs, options.train, index);
  const auto models = run_training(jobs, splits, scenario, options);

  const PipelineContext context(scenario);
  // Warm the shared caches before going parallel.
  for (const auto& spec : specs) {
    if (spec.use_ntl || spec.use_prox) (void)context.factor(spec);
  }
  for (const auto& job : jobs) (void)context.features(job.config.prox_gamma);

  struct EvalJob {
    std::size_t split;
    std::size_t spec;
  };
  std::vector<EvalJob> eval_jobs;
  for (std::size_t sp = 0; sp < specs.size(); ++sp) {
    for (std::size_t s = 0; s < splits.size(); ++s) eval_jobs.push_back({s, sp});
  }
  std::vector<std::vector<RegionMetrics>> metrics(eval_jobs.size());
  std::vector<double> conservation(eval_jobs.size(), 0.0);
  parallel_for(eval_jobs.size(), options.workers, [&](std::size_t i) {
    const auto& split = splits[eval_jobs[i].split];
    const auto& spec = specs[eval_jobs[i].spec];
    const TrainedAllocator* trained = nullptr;
    if (spec.base == BaseKind::Learned) {
      TrainConfig cfg = training_config(spec, options.train);
      trained = &models[index.at({eval_jobs[i].split, training_key(cfg)})];
    }
    const std::uint64_t noise_seed = derive_seed(split.seed, 1000 + static_cast<std::uint64_t>(split.fold));
    const auto output = run_method(spec, context, trained, noise_seed);
    conservation[i] = prediction_conservation_error(output, scenario);
    const auto all = evaluate_output(output, scenario);
    for (std::size_t r : split.test) metrics[i].push_back(all[r]);
  });

  CVResult result;
  for (std::size_t i = 0; i < eval_jobs.size(); ++i) {
    const auto& split = splits[eval_jobs[i].split];
    const auto& spec = specs[eval_jobs[i].spec];
    for (const auto& m : metrics[i]) result.report.rows.push_back({spec.name, split.seed, m});
    auto& worst = result.conservation_error[spec.name];
    worst = std::max(worst, conservation[i]);
  }

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& split = splits[jobs[j].split];
    AuditEntry entry{split.seed, split.fold, jobs[j].key, models[j].train_region_ids, region_ids(scenario, split.test)};
    if (!plan.single_pass) {
      for (Id id : entry.test_region_ids) {
        if (std::find(entry.train_region_ids.begin(), entry.train_region_ids.end(), id) != entry.train_region_ids.end())
          throw RuntimeError("model trained on test region " + std::to_string(id));
      }
    }
    result.audit.push_back(std::move(entry));

    if (jobs[j].key != "plain") continue;
    const auto weights = allocation_weights(models[j].params, context.features(models[j].config.prox_gamma), scenario);
    ProbeRecord probe{split.seed, split.fold, {}, {}};
    MethodSpec ntl_only = parse_method("GNNpostN");
    MethodSpec prox_only = parse_method("GNNpostP");
    auto restrict = [&](CorrelationSummary full) {
      CorrelationSummary out;
      std::vector<double> valid;
      for (std::size_t r : split.test) {
        out.per_source.push_back(full.per_source[r]);
        if (full.per_source[r]) {
          valid.push_back(*full.per_source[r]);
        } else {
          ++out.n_missing;
        }
      }
      out.n_sources = split.test.size();
      out.mean = valid.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(valid);
      out.std = sample_std(valid);
      return out;
    };
    probe.ntl = restrict(probe_weight_factor_correlation(weights, context.factor(ntl_only), scenario));
    probe.prox = restrict(probe_weight_factor_correlation(weights, context.factor(prox_only), scenario));
    result.probes.push_back(std::move(probe));
  }
  return result;
}

std::string audit_csv(const std::vector<AuditEntry>& audit) {
  auto join = [](const std::vector<Id>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? ";" : "") + std::to_string(ids[i]);
    return s;
  };
  std::string out = "seed,fold,model,train_region_ids,test_region_ids\n";
  for (const auto& e : audit) {
    out += std::to_string(e.seed) + "," + std::to_string(e.fold) + "," + e.model + "," + join(e.train_region_ids) +
           "," + join(e.test_region_ids) + "\n";
  }
  return out;
}

std::string probe_csv(const std::vector<ProbeRecord>& probes) {
  using detail::fmt_double;
  std::string out = "seed,fold,ntl_rho_mean,ntl_rho_std,prox_rho_mean,prox_rho_std,n_sources\n";
  for (const auto& p : probes) {
    auto opt = [](double v) { return std::isfinite(v) ? fmt_double(v) : std::string(); };
    out += std::to_string(p.seed) + "," + std::to_string(p.fold) + "," + opt(p.ntl.mean) + "," + fmt_double(p.ntl.std) +
           "," + opt(p.prox.mean) + "," + fmt_double(p.prox.std) + "," + std::to_string(p.ntl.n_sources) + "\n";
  }
  return out;
}

// ------------------------------------------------------------ sweeps

const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Alpha:
      return "alpha";
    case SweepAxis::Gamma:
      return "gamma";
    case SweepAxis::Beta:
      return "beta";
    case SweepAxis::Lambda:
      return "lambda";
  }
  return "?";
}

SweepAxis parse_sweep_axis(const std::string& name) {
  for (SweepAxis a : {SweepAxis::Alpha, SweepAxis::Gamma, SweepAxis::Beta, SweepAxis::Lambda}) {
    if (name == sweep_axis_name(a)) return a;
  }
  throw ValidationError("unknown sweep axis '" + name + "' (alpha, gamma, beta, lambda)");
}

std::vector<double> default_sweep_levels(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Alpha:
      return {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
    case SweepAxis::Gamma:
      return {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    case SweepAxis::Beta:
      return {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
    case SweepAxis::Lambda:
      return {0.01, 0.05, 0.1, 0.2, 0.5};
  }
  return {};
}

std::vector<std::string> default_sweep_methods(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Alpha:
      return {"GNNpostN"};
    case SweepAxis::Gamma:
      return {"GNNpostP"};
    case SweepAxis::Beta:
      return {"GNNpostNP"};
    case SweepAxis::Lambda:
      return {"GNNpriorN", "GNNpriorP"};
  }
  return {};
}

std::vector<SweepRow> run_sweep(SweepAxis axis, const std::vector<double>& levels, const Scenario& scenario,
                                const SweepOptions& options) {
  if (levels.empty()) throw ValidationError("sweep needs at least one level");
  const auto methods = options.methods.empty() ? default_sweep_methods(axis) : options.methods;
  std::vector<MethodSpec> specs;
  std::vector<std::pair<double, std::string>> labels;
  for (const auto& method : methods) {
    for (double level : levels) {
      MethodSpec spec = parse_method(method);
      switch (axis) {
        case SweepAxis::Alpha:
          spec.alpha = level;
          break;
        case SweepAxis::Gamma:
          spec.gamma = level;
          break;
        case SweepAxis::Beta:
          spec.beta = level;
          break;
        case SweepAxis::Lambda:
          if (spec.integration != Integration::PriorLoss)
            throw ValidationError("lambda sweep needs a prior-loss method, got " + method);
          spec.lambda = level;
          break;
      }
      spec.name = method + "@" + sweep_axis_name(axis) + "=" + fmt_level(level);
      specs.push_back(spec);
      labels.emplace_back(level, method);
    }
  }
  const CVResult cv = run_cv(options.plan, scenario, specs, options.cv);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    rows.push_back({axis, labels[i].first, labels[i].second, aggregate(cv.report, specs[i].name)});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  using detail::fmt_double;
  std::string out = "axis,level,method,rmse_mean,rmse_std,mae_mean,mae_std,corr_mean,corr_std,n_regions\n";
  for (const auto& r : rows) {
    const auto& a = r.aggregate;
    out += std::string(sweep_axis_name(r.axis)) + "," + fmt_double(r.level) + "," + r.method + "," +
           fmt_double(a.rmse.mean) + "," + fmt_double(a.rmse.std) + "," + fmt_double(a.mae.mean) + "," +
           fmt_double(a.mae.std) + "," + (std::isfinite(a.corr.mean) ? fmt_double(a.corr.mean) : std::string()) + "," +
           fmt_double(a.corr.std) + "," + std::to_string(a.rmse.n) + "\n";
  }
  return out;
}

}  // namespace loadalloc
