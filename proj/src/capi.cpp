#include "loadalloc/loadalloc.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "loadalloc/error.hpp"
#include "loadalloc/experiment.hpp"
#include "loadalloc/learner.hpp"
#include "loadalloc/pipeline.hpp"
#include "loadalloc/scenario.hpp"
#include "loadalloc/stats.hpp"

struct la_scenario {
  loadalloc::Scenario scenario;
};

struct la_allocator {
  loadalloc::TrainedAllocator allocator;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
la_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return LA_OK;
  } catch (const loadalloc::ValidationError& e) {
    g_last_error = e.what();
    return LA_ERR_VALIDATION;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LA_ERR_RUNTIME;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LA_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return LA_ERR_RUNTIME;
  }
}

la_status argument_error(const char* message) {
  g_last_error = message;
  return LA_ERR_ARGUMENT;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

loadalloc::Manifest manifest_or_default(const char* json, const char* base_dir = nullptr) {
  if (!json) return {};
  return loadalloc::parse_manifest(json, base_dir ? std::filesystem::path(base_dir) : std::filesystem::path());
}

}  // namespace

extern "C" {

const char* la_version(void) { return "1.0.0"; }

const char* la_last_error(void) { return g_last_error.c_str(); }

void la_free_string(char* s) { std::free(s); }

la_status la_scenario_generate(const char* manifest_json, la_scenario** out) {
  if (!out) return argument_error("la_scenario_generate: null output handle");
  *out = nullptr;
  return guarded([&] {
    const auto m = manifest_or_default(manifest_json);
    *out = new la_scenario{loadalloc::generate(m.synth).scenario};
  });
}

la_status la_scenario_load(const char* dir, la_scenario** out) {
  if (!dir || !out) return argument_error("la_scenario_load: null argument");
  *out = nullptr;
  return guarded([&] { *out = new la_scenario{loadalloc::load_scenario(dir)}; });
}

la_status la_scenario_save(const la_scenario* scenario, const char* dir, int gzip) {
  if (!scenario || !dir) return argument_error("la_scenario_save: null argument");
  return guarded([&] { loadalloc::save_scenario(scenario->scenario, dir, gzip != 0); });
}

la_status la_scenario_counts(const la_scenario* scenario, size_t* n_regions, size_t* n_agents,
                             size_t* n_substations) {
  if (!scenario) return argument_error("la_scenario_counts: null handle");
  if (n_regions) *n_regions = scenario->scenario.regions().size();
  if (n_agents) *n_agents = scenario->scenario.agents().size();
  if (n_substations) *n_substations = scenario->scenario.substations().size();
  g_last_error.clear();
  return LA_OK;
}

la_status la_scenario_substation_demand(const la_scenario* scenario, double* out, size_t n) {
  if (!scenario || !out) return argument_error("la_scenario_substation_demand: null argument");
  const auto& subs = scenario->scenario.substations();
  if (n != subs.size()) return argument_error("la_scenario_substation_demand: buffer size mismatch");
  for (std::size_t j = 0; j < n; ++j) out[j] = subs[j].demand_actual;
  g_last_error.clear();
  return LA_OK;
}

void la_scenario_free(la_scenario* scenario) { delete scenario; }

la_status la_train(const la_scenario* scenario, const char* manifest_json, la_allocator** out) {
  if (!scenario || !out) return argument_error("la_train: null argument");
  *out = nullptr;
  return guarded([&] {
    const auto m = manifest_or_default(manifest_json);
    *out = new la_allocator{loadalloc::train(scenario->scenario, m.train)};
  });
}

la_status la_allocator_from_json(const char* json, la_allocator** out) {
  if (!json || !out) return argument_error("la_allocator_from_json: null argument");
  *out = nullptr;
  return guarded([&] { *out = new la_allocator{loadalloc::trained_allocator_from_json(json)}; });
}

la_status la_allocator_to_json(const la_allocator* allocator, char** out) {
  if (!allocator || !out) return argument_error("la_allocator_to_json: null argument");
  *out = nullptr;
  return guarded([&] { *out = copy_string(loadalloc::to_json(allocator->allocator)); });
}

void la_allocator_free(la_allocator* allocator) { delete allocator; }

la_status la_run_method(const la_scenario* scenario, const char* method, const la_allocator* allocator,
                        uint64_t noise_seed, double* out, size_t n) {
  if (!scenario || !method || !out) return argument_error("la_run_method: null argument");
  if (n != scenario->scenario.substations().size()) return argument_error("la_run_method: buffer size mismatch");
  return guarded([&] {
    const auto spec = loadalloc::parse_method(method);
    if (spec.base == loadalloc::BaseKind::Learned && !allocator)
      throw loadalloc::ValidationError(std::string("method ") + method + " needs a trained allocator");
    const auto output = loadalloc::run_method(spec, scenario->scenario, allocator ? &allocator->allocator : nullptr,
                                              noise_seed);
    const auto& first = output.substation_demand.front();
    std::copy(first.begin(), first.end(), out);
  });
}

la_status la_wilcoxon(const double* x, const double* y, size_t n, double* p_value) {
  if ((n > 0 && (!x || !y)) || !p_value) return argument_error("la_wilcoxon: null argument");
  return guarded([&] {
    *p_value = loadalloc::wilcoxon_signed_rank(std::span<const double>(x, n), std::span<const double>(y, n)).p_value;
  });
}

la_status la_holm(const double* p, size_t n, double* out) {
  if (n > 0 && (!p || !out)) return argument_error("la_holm: null argument");
  return guarded([&] {
    const auto adjusted = loadalloc::holm_bonferroni(std::span<const double>(p, n));
    std::copy(adjusted.begin(), adjusted.end(), out);
  });
}

la_status la_run_command(const char* command, const char* manifest_json, const char* base_dir, char** out_text) {
  if (!command) return argument_error("la_run_command: null command");
  if (out_text) *out_text = nullptr;
  return guarded([&] {
    const auto m = manifest_or_default(manifest_json, base_dir);
    const std::string text = loadalloc::run_command(command, m);
    if (out_text) *out_text = copy_string(text);
  });
}

la_status la_manifest_normalize(const char* manifest_json, const char* base_dir, char** out) {
  if (!out) return argument_error("la_manifest_normalize: null output");
  *out = nullptr;
  return guarded([&] { *out = copy_string(loadalloc::manifest_json(manifest_or_default(manifest_json, base_dir))); });
}

}  // extern "C"
