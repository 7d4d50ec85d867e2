#include "loadalloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <json.hpp>

#include "loadalloc/error.hpp"
#include "loadalloc/report.hpp"
#include "loadalloc/rng.hpp"
#include "loadalloc/stats.hpp"
#include "text_format.hpp"

namespace loadalloc {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
using detail::fmt_double;

// Strict object reader: every key must be claimed, so typos surface as errors.
class Reader {
 public:
  Reader(const json& object, std::string where) : object_(object), where_(std::move(where)) {
    if (!object_.is_object()) throw ValidationError("manifest: '" + where_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = object_.find(key);
    if (it == object_.end()) return;
    claimed_.push_back(key);
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ValidationError("manifest: '" + where_ + "." + key + "' has the wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    auto it = object_.find(key);
    if (it == object_.end()) return;
    claimed_.push_back(key);
    if (it->is_null()) {
      out.reset();
      return;
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ValidationError("manifest: '" + where_ + "." + key + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    auto it = object_.find(key);
    if (it == object_.end()) return nullptr;
    claimed_.push_back(key);
    return &*it;
  }

  void finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (std::find(claimed_.begin(), claimed_.end(), it.key()) == claimed_.end())
        throw ValidationError("manifest: unknown key '" + it.key() + "' in '" + where_ + "'");
    }
  }

 private:
  const json& object_;
  std::string where_;
  std::vector<std::string> claimed_;
};

CVPlan read_plan(const json& j, const std::string& where, CVPlan plan) {
  Reader r(j, where);
  r.get("seeds", plan.seeds);
  r.get("folds", plan.n_folds);
  r.get("single_pass", plan.single_pass);
  if (const json* only = r.child("only")) {
    plan.only.clear();
    if (!only->is_array()) throw ValidationError("manifest: '" + where + ".only' must be a list of [seed, fold]");
    for (const auto& pair : *only) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_unsigned() || !pair[1].is_number_integer())
        throw ValidationError("manifest: '" + where + ".only' must be a list of [seed, fold]");
      plan.only.emplace_back(pair[0].get<std::uint64_t>(), pair[1].get<int>());
    }
  }
  r.finish();
  return plan;
}

ojson plan_json(const CVPlan& plan) {
  ojson j;
  j["seeds"] = plan.seeds;
  j["folds"] = plan.n_folds;
  j["single_pass"] = plan.single_pass;
  ojson only = ojson::array();
  for (const auto& [seed, fold] : plan.only) only.push_back({seed, fold});
  j["only"] = std::move(only);
  return j;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
  Manifest m;
  Reader r(root, "manifest");
  r.get("version", m.version);
  if (m.version != kManifestVersion)
    throw ValidationError("manifest version " + std::to_string(m.version) + " is not supported");

  std::optional<std::string> scenario;
  r.get_optional("scenario", scenario);
  if (scenario) m.scenario_path = resolve(base_dir, *scenario);

  if (const json* s = r.child("synthetic")) {
    Reader sr(*s, "synthetic");
    SynthConfig& c = m.synth;
    sr.get("seed", c.seed);
    sr.get("n_regions", c.n_regions);
    sr.get("agents_per_region", c.agents_per_region);
    sr.get("substations_per_region", c.substations_per_region);
    sr.get("urbanization_clusters", c.urbanization_clusters);
    sr.get("base_signal", c.base_signal);
    sr.get("ntl_fidelity", c.ntl_fidelity);
    sr.get("prox_fidelity", c.prox_fidelity);
    sr.get("demand_exponent", c.demand_exponent);
    sr.get("demand_noise", c.demand_noise);
    sr.get("landuse_noise", c.landuse_noise);
    sr.get("ntl_noise", c.ntl_noise);
    sr.get("ntl_exponent", c.ntl_exponent);
    sr.get("ntl_dark_threshold", c.ntl_dark_threshold);
    sr.get("background", c.background);
    sr.get("substation_density", c.substation_density);
    sr.get("load_density_min", c.load_density_min);
    sr.get("load_density_max", c.load_density_max);
    sr.finish();
  }
  validate(m.synth);

  r.get_optional("methods", m.methods);
  if (const json* p = r.child("plan")) m.plan = read_plan(*p, "plan", m.plan);

  if (const json* t = r.child("train")) {
    Reader tr(*t, "train");
    TrainConfig& c = m.train;
    tr.get("lambda_ntl", c.lambda_ntl);
    tr.get("lambda_prox", c.lambda_prox);
    tr.get("learning_rate", c.learning_rate);
    tr.get("max_epochs", c.max_epochs);
    tr.get("convergence_tol", c.convergence_tol);
    tr.get("temperature", c.temperature);
    tr.get("init_scale", c.init_scale);
    tr.get("feature_fusion", c.feature_fusion);
    tr.get("prox_gamma", c.prox_gamma);
    tr.finish();
  }
  validate(m.train);

  r.get("workers", m.workers);
  std::string out_dir = m.output_dir.string();
  r.get("output_dir", out_dir);
  m.output_dir = resolve(base_dir, out_dir);

  if (const json* s = r.child("sweep")) {
    Reader sr(*s, "sweep");
    std::string axis = sweep_axis_name(m.sweep.axis);
    sr.get("axis", axis);
    m.sweep.axis = parse_sweep_axis(axis);
    sr.get("levels", m.sweep.levels);
    sr.get("methods", m.sweep.methods);
    if (const json* p = sr.child("plan")) m.sweep.plan = read_plan(*p, "sweep.plan", m.plan);
    sr.finish();
  }

  if (const json* p = r.child("powerflow")) {
    Reader pr(*p, "powerflow");
    PowerflowSettings& s = m.powerflow;
    pr.get_optional("region_id", s.region_id);
    pr.get("methods", s.methods);
    pr.get("power_factor", s.power_factor);
    pr.get("total_load_mva", s.total_load_mva);
    pr.get("s_base_mva", s.network.s_base_mva);
    pr.get("v_base_kv", s.network.v_base_kv);
    pr.get("slack_vm_pu", s.network.slack_vm_pu);
    pr.get("min_line_km", s.network.min_line_km);
    if (const json* line = pr.child("line")) {
      Reader lr(*line, "powerflow.line");
      lr.get("r_ohm_per_km", s.network.line.r_ohm_per_km);
      lr.get("x_ohm_per_km", s.network.line.x_ohm_per_km);
      lr.get("c_nf_per_km", s.network.line.c_nf_per_km);
      lr.get("rating_ka", s.network.line.rating_ka);
      lr.get("frequency_hz", s.network.line.frequency_hz);
      lr.finish();
    }
    pr.finish();
  }

  if (const json* s = r.child("stratify")) {
    Reader sr(*s, "stratify");
    std::optional<std::vector<double>> breaks;
    breaks = std::vector<double>(m.stratify.density_breaks->begin(), m.stratify.density_breaks->end());
    sr.get_optional("density_breaks", breaks);
    if (breaks) {
      if (breaks->size() != 2 || !((*breaks)[0] <= (*breaks)[1]))
        throw ValidationError("manifest: 'stratify.density_breaks' needs two ascending values");
      m.stratify.density_breaks = std::array<double, 2>{(*breaks)[0], (*breaks)[1]};
    } else {
      m.stratify.density_breaks.reset();
    }
    sr.get_optional("entropy_break", m.stratify.entropy_break);
    sr.finish();
  }
  r.finish();
  (void)manifest_methods(m);
  return m;
}

std::string manifest_json(const Manifest& m) {
  ojson j;
  j["version"] = m.version;
  j["scenario"] = m.scenario_path ? ojson(m.scenario_path->string()) : ojson(nullptr);
  const SynthConfig& c = m.synth;
  j["synthetic"] = {{"seed", c.seed},
                    {"n_regions", c.n_regions},
                    {"agents_per_region", c.agents_per_region},
                    {"substations_per_region", c.substations_per_region},
                    {"urbanization_clusters", c.urbanization_clusters},
                    {"base_signal", c.base_signal},
                    {"ntl_fidelity", c.ntl_fidelity},
                    {"prox_fidelity", c.prox_fidelity},
                    {"demand_exponent", c.demand_exponent},
                    {"demand_noise", c.demand_noise},
                    {"landuse_noise", c.landuse_noise},
                    {"ntl_noise", c.ntl_noise},
                    {"ntl_exponent", c.ntl_exponent},
                    {"ntl_dark_threshold", c.ntl_dark_threshold},
                    {"background", c.background},
                    {"substation_density", c.substation_density},
                    {"load_density_min", c.load_density_min},
                    {"load_density_max", c.load_density_max}};
  j["methods"] = m.methods ? ojson(*m.methods) : ojson(nullptr);
  j["plan"] = plan_json(m.plan);
  const TrainConfig& t = m.train;
  j["train"] = {{"lambda_ntl", t.lambda_ntl},       {"lambda_prox", t.lambda_prox},
                {"learning_rate", t.learning_rate}, {"max_epochs", t.max_epochs},
                {"convergence_tol", t.convergence_tol}, {"temperature", t.temperature},
                {"init_scale", t.init_scale},       {"feature_fusion", t.feature_fusion},
                {"prox_gamma", t.prox_gamma}};
  j["workers"] = m.workers;
  j["output_dir"] = m.output_dir.string();
  ojson sweep;
  sweep["axis"] = sweep_axis_name(m.sweep.axis);
  sweep["levels"] = m.sweep.levels;
  sweep["methods"] = m.sweep.methods;
  if (m.sweep.plan) sweep["plan"] = plan_json(*m.sweep.plan);
  j["sweep"] = std::move(sweep);
  const PowerflowSettings& p = m.powerflow;
  j["powerflow"] = {{"region_id", p.region_id ? ojson(*p.region_id) : ojson(nullptr)},
                    {"methods", p.methods},
                    {"power_factor", p.power_factor},
                    {"total_load_mva", p.total_load_mva},
                    {"s_base_mva", p.network.s_base_mva},
                    {"v_base_kv", p.network.v_base_kv},
                    {"slack_vm_pu", p.network.slack_vm_pu},
                    {"min_line_km", p.network.min_line_km},
                    {"line",
                     {{"r_ohm_per_km", p.network.line.r_ohm_per_km},
                      {"x_ohm_per_km", p.network.line.x_ohm_per_km},
                      {"c_nf_per_km", p.network.line.c_nf_per_km},
                      {"rating_ka", p.network.line.rating_ka},
                      {"frequency_hz", p.network.line.frequency_hz}}}};
  ojson strat;
  strat["density_breaks"] = m.stratify.density_breaks
                                ? ojson(std::vector<double>(m.stratify.density_breaks->begin(),
                                                            m.stratify.density_breaks->end()))
                                : ojson(nullptr);
  strat["entropy_break"] = m.stratify.entropy_break ? ojson(*m.stratify.entropy_break) : ojson(nullptr);
  j["stratify"] = std::move(strat);
  return j.dump(2) + "\n";
}

std::vector<MethodSpec> manifest_methods(const Manifest& manifest) {
  std::vector<std::string> names;
  if (manifest.methods) {
    names = *manifest.methods;
    if (names.empty()) throw ValidationError("manifest: 'methods' lists no methods");
  } else {
    names = method_matrix_names();
    for (const auto& n : isolation_method_names()) names.push_back(n);
  }
  std::vector<MethodSpec> specs;
  for (const auto& n : names) specs.push_back(parse_method(n));
  return specs;
}

Scenario resolve_scenario(const Manifest& manifest) {
  if (manifest.scenario_path) return load_scenario(*manifest.scenario_path);
  const auto saved = manifest.output_dir / "scenario";
  if (std::filesystem::exists(saved / "regions.csv") || std::filesystem::exists(saved / "regions.csv.gz"))
    return load_scenario(saved);
  return generate(manifest.synth).scenario;
}

namespace {

CVOptions cv_options(const Manifest& m, bool use_model_cache) {
  CVOptions o;
  o.train = m.train;
  o.workers = m.workers;
  if (use_model_cache) o.model_dir = m.output_dir / "models";
  return o;
}

std::string factor_correlation_line(const Scenario& scenario) {
  const auto fn = ntl_factor(scenario);
  const auto fp = prox_factor(scenario);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < scenario.agents().size(); ++i) {
    if (!is_rci(scenario.agents()[i])) continue;
    a.push_back(fn.factor[i]);
    b.push_back(fp.factor[i]);
  }
  const auto r = pearson(a, b);
  const auto rho = spearman(a, b);
  return "NTL/Proximity factor correlation over " + std::to_string(a.size()) +
         " RCI agents: Pearson " + (r ? detail::fmt_fixed(*r, 3) : std::string("n/a")) + ", Spearman " +
         (rho ? detail::fmt_fixed(*rho, 3) : std::string("n/a")) + "\n";
}

}  // namespace

std::string cmd_generate(const Manifest& manifest) {
  const auto generated = generate(manifest.synth);
  const Scenario& s = generated.scenario;
  const auto dir = manifest.output_dir / "scenario";
  save_scenario(s, dir);
  std::string truth = "agent_id,demand\n";
  for (std::size_t a = 0; a < s.agents().size(); ++a)
    truth += std::to_string(s.agents()[a].id) + "," + fmt_double(generated.agent_demand[a]) + "\n";
  write_text_file(dir / "agent_demand.csv", truth);
  write_text_file(manifest.output_dir / "manifest.json", manifest_json(manifest));
  return "generated " + std::to_string(s.regions().size()) + " regions, " + std::to_string(s.agents().size()) +
         " agents, " + std::to_string(s.substations().size()) + " substations into " + dir.string() + "\n" +
         factor_correlation_line(s);
}

std::string cmd_train(const Manifest& manifest) {
  const Scenario scenario = resolve_scenario(manifest);
  const auto specs = manifest_methods(manifest);
  const auto models = train_models(manifest.plan, scenario, specs, cv_options(manifest, true));
  std::string table = "seed,fold,model,epochs,converged,landuse_loss,ntl_prior,prox_prior,total_loss\n";
  for (const auto& m : models) {
    const auto& last = m.allocator.loss_trace.back();
    table += std::to_string(m.seed) + "," + std::to_string(m.fold) + "," + m.key + "," +
             std::to_string(m.allocator.loss_trace.size() - 1) + "," + (m.allocator.converged ? "true" : "false") +
             "," + fmt_double(last.landuse) + "," + fmt_double(last.ntl_prior) + "," + fmt_double(last.prox_prior) +
             "," + fmt_double(last.total) + "\n";
  }
  write_text_file(manifest.output_dir / "training.csv", table);
  return "trained " + std::to_string(models.size()) + " models into " + (manifest.output_dir / "models").string() +
         "\n";
}

std::string cmd_evaluate(const Manifest& manifest) {
  const Scenario scenario = resolve_scenario(manifest);
  const auto specs = manifest_methods(manifest);
  const CVResult cv = run_cv(manifest.plan, scenario, specs, cv_options(manifest, true));
  const auto comparisons = default_planned_comparisons();
  const auto& out = manifest.output_dir;
  write_text_file(out / "metrics.csv", report_csv(cv.report));
  write_text_file(out / "metrics_by_seed.csv", report_seed_csv(cv.report));
  write_text_file(out / "summary.json", report_summary_json(cv.report, comparisons));
  write_text_file(out / "audit.csv", audit_csv(cv.audit));
  write_text_file(out / "probes.csv", probe_csv(cv.probes));

  std::string cons = "method,conserving,max_relative_error\n";
  for (const auto& spec : specs) {
    const bool conserving = spec.integration != Integration::PostMultiplicativeRaw;
    cons += spec.name + "," + (conserving ? "true" : "false") + "," + fmt_double(cv.conservation_error.at(spec.name)) +
            "\n";
    if (conserving && cv.conservation_error.at(spec.name) > 1e-9)
      throw RuntimeError("method " + spec.name + " violates demand conservation");
  }
  write_text_file(out / "conservation.csv", cons);

  std::string strata = "method,density_band,diversity_band,n_regions,mean_rmse\n";
  for (const auto& row : stratify(cv.report, scenario, manifest.stratify)) {
    static const char* dnames[] = {"low", "mid", "high"};
    static const char* enames[] = {"low", "high"};
    strata += row.method + "," + dnames[row.density_band] + "," + enames[row.diversity_band] + "," +
              std::to_string(row.n) + "," + detail::fmt_optional(row.mean_rmse) + "\n";
  }
  write_text_file(out / "strata.csv", strata);
  write_text_file(out / "manifest.json", manifest_json(manifest));

  const std::string text = render_report(cv.report, comparisons);
  write_text_file(out / "report.txt", text);
  return text;
}

std::string cmd_sweep(const Manifest& manifest) {
  const Scenario scenario = resolve_scenario(manifest);
  const SweepAxis axis = manifest.sweep.axis;
  SweepOptions options;
  options.cv = cv_options(manifest, false);
  options.methods = manifest.sweep.methods;
  if (manifest.sweep.plan) {
    options.plan = *manifest.sweep.plan;
  } else {
    options.plan = manifest.plan;
    if (axis == SweepAxis::Lambda && !options.plan.single_pass)
      options.plan.only = {{options.plan.seeds.front(), 0}};
  }
  const auto levels = manifest.sweep.levels.empty() ? default_sweep_levels(axis) : manifest.sweep.levels;
  const auto rows = run_sweep(axis, levels, scenario, options);
  const auto path = manifest.output_dir / (std::string("sweep_") + sweep_axis_name(axis) + ".csv");
  write_text_file(path, sweep_csv(rows));

  std::string text = std::string("Sweep over ") + sweep_axis_name(axis) + " (mean RMSE)\n";
  for (const auto& r : rows)
    text += "  " + r.method + "  " + detail::fmt_fixed(r.level, 2) + "  " + detail::fmt_fixed(r.aggregate.rmse.mean, 3) + "\n";
  return text;
}

std::string cmd_powerflow(const Manifest& manifest) {
  const Scenario scenario = resolve_scenario(manifest);
  const PowerflowSettings& settings = manifest.powerflow;
  const std::size_t region =
      settings.region_id ? scenario.region_index(*settings.region_id) : std::size_t{0};
  const auto subs_idx = scenario.region_substations(region);
  std::vector<Substation> subs;
  for (std::size_t j : subs_idx) subs.push_back(scenario.substations()[j]);
  const NetworkModel net = build_network(subs, settings.network);

  const double d_total = scenario.regions()[region].demand_total;
  const double scale = settings.total_load_mva > 0.0 ? settings.total_load_mva / d_total : 1.0;
  auto region_loads = [&](const std::vector<double>& all) {
    std::vector<double> mva;
    for (std::size_t j : subs_idx) mva.push_back(all[j] * scale);
    return mva;
  };

  std::vector<double> truth_all(scenario.substations().size());
  for (std::size_t j = 0; j < truth_all.size(); ++j) truth_all[j] = scenario.substations()[j].demand_actual;
  const auto truth_mva = region_loads(truth_all);
  const auto truth_sol = solve_ac(net, loads_from_demand(truth_mva, settings.power_factor));

  // Learned methods follow the single train-and-evaluate protocol on this scenario.
  std::vector<MethodSpec> specs;
  for (const auto& n : settings.methods) specs.push_back(parse_method(n));
  CVPlan plan;
  plan.seeds = {manifest.plan.seeds.front()};
  plan.single_pass = true;
  const auto models = train_models(plan, scenario, specs, cv_options(manifest, false));
  std::map<std::string, const TrainedAllocator*> by_key;
  for (const auto& m : models) by_key[m.key] = &m.allocator;
  const PipelineContext context(scenario);

  const auto dir = manifest.output_dir / "powerflow";
  write_text_file(dir / "network.json", network_json(net));
  write_text_file(dir / "lines_truth.csv", line_loading_csv(net, truth_sol));

  std::string summary = "method,delta_mae_pp,l_max_pct,converged,iterations,max_mismatch_pu,corr,loo_corr_min,loo_corr_std\n";
  std::string jack = "method,removed_substation_id,loo_corr\n";
  auto add_row = [&](const std::string& name, const std::vector<double>& mva, const PowerFlowSolution& sol) {
    const auto dev = loading_deviation(sol, truth_sol);
    std::string corr, loo_min, loo_std;
    if (mva.size() >= 4) {
      const auto jk = jackknife_loo_corr(mva, truth_mva);
      corr = detail::fmt_optional(jk.full);
      loo_min = detail::fmt_optional(jk.min);
      loo_std = fmt_double(jk.std);
      for (std::size_t i = 0; i < jk.loo.size(); ++i)
        jack += name + "," + std::to_string(subs[i].id) + "," + detail::fmt_optional(jk.loo[i]) + "\n";
    }
    summary += name + "," + fmt_double(dev.mae_pp) + "," + fmt_double(dev.max_loading_pct) + "," +
               (sol.converged ? "true" : "false") + "," + std::to_string(sol.iterations) + "," +
               fmt_double(sol.max_mismatch_pu) + "," + corr + "," + loo_min + "," + loo_std + "\n";
  };
  add_row("truth", truth_mva, truth_sol);

  std::string text = "Power flow on region " + std::to_string(scenario.regions()[region].id) + " (" +
                     std::to_string(subs.size()) + " substations, " + std::to_string(net.lines.size()) +
                     " lines, loads scaled to " + detail::fmt_fixed(d_total * scale, 1) + " MVA)\n";
  text += "  truth        l_max " + detail::fmt_fixed(loading_deviation(truth_sol, truth_sol).max_loading_pct, 1) + "%\n";
  for (const auto& spec : specs) {
    const TrainedAllocator* trained = nullptr;
    if (spec.base == BaseKind::Learned) trained = by_key.at(training_key(training_config(spec, manifest.train)));
    const auto output = run_method(spec, context, trained, derive_seed(plan.seeds.front(), 1000));
    const auto mva = region_loads(output.substation_demand.front());
    const auto sol = solve_ac(net, loads_from_demand(mva, settings.power_factor));
    write_text_file(dir / ("lines_" + spec.name + ".csv"), line_loading_csv(net, sol));
    add_row(spec.name, mva, sol);
    const auto dev = loading_deviation(sol, truth_sol);
    text += "  " + spec.name + std::string(spec.name.size() < 12 ? 12 - spec.name.size() : 0, ' ') + " l_max " +
            detail::fmt_fixed(dev.max_loading_pct, 1) + "%  dMAE " + detail::fmt_fixed(dev.mae_pp, 2) + " pp" +
            (sol.converged ? "" : "  (not converged)") + "\n";
  }
  write_text_file(dir / "summary.csv", summary);
  write_text_file(dir / "jackknife.csv", jack);
  return text;
}

std::string cmd_report(const Manifest& manifest) {
  const auto path = manifest.output_dir / "metrics_by_seed.csv";
  if (!std::filesystem::exists(path)) throw ValidationError("no stored metrics at " + path.string() + "; run evaluate first");
  const EvalReport report = parse_report_seed_csv(read_text_file(path));
  const auto comparisons = default_planned_comparisons();
  const std::string text = render_report(report, comparisons);
  write_text_file(manifest.output_dir / "report.txt", text);
  return text;
}

std::string run_command(const std::string& command, const Manifest& manifest) {
  static const std::map<std::string, std::function<std::string(const Manifest&)>> commands{
      {"generate", cmd_generate}, {"train", cmd_train},         {"evaluate", cmd_evaluate},
      {"sweep", cmd_sweep},       {"powerflow", cmd_powerflow}, {"report", cmd_report}};
  auto it = commands.find(command);
  if (it == commands.end()) throw ValidationError("unknown command '" + command + "'");
  return it->second(manifest);
}

}  // namespace loadalloc
