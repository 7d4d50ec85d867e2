#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "loadalloc/evaluation.hpp"
#include "loadalloc/experiment.hpp"
#include "loadalloc/learner.hpp"
#include "loadalloc/powerflow.hpp"
#include "loadalloc/scenario.hpp"

namespace loadalloc {

inline constexpr int kManifestVersion = 1;

struct PowerflowSettings {
  std::optional<Id> region_id;  ///< first region when unset
  std::vector<std::string> methods{"Uni", "GPM", "GPMpostNP", "GNN", "GNNpostNP", "GNNaddNP", "GNNpriorNP"};
  double power_factor = 0.95;
  /// Region demand is rescaled to this total before solving (MVA); <= 0 keeps it.
  double total_load_mva = 60.0;
  NetworkConfig network;
};

struct SweepSettings {
  SweepAxis axis = SweepAxis::Beta;
  std::vector<double> levels;        ///< empty: defaults for the axis
  std::vector<std::string> methods;  ///< empty: defaults for the axis
  /// Plan override; the lambda axis defaults to a single (first seed, fold 0) pass.
  std::optional<CVPlan> plan;
};

/// Declarative description of one experiment. Relative paths resolve against
/// the manifest's directory.
struct Manifest {
  int version = kManifestVersion;
  std::optional<std::filesystem::path> scenario_path;
  SynthConfig synth;
  /// Unset: method matrix plus isolation variants. An explicit empty list is rejected.
  std::optional<std::vector<std::string>> methods;
  CVPlan plan;
  TrainConfig train;
  unsigned workers = 0;
  std::filesystem::path output_dir = "loadalloc-out";
  SweepSettings sweep;
  PowerflowSettings powerflow;
  StratifyConfig stratify;
};

Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir = {});
std::string manifest_json(const Manifest& manifest);

std::vector<MethodSpec> manifest_methods(const Manifest& manifest);

/// Scenario named by the manifest, else the one saved under the output
/// directory by `generate`, else freshly generated from the synthetic config.
Scenario resolve_scenario(const Manifest& manifest);

/// Subcommands. Each writes under manifest.output_dir and returns a short
/// human-readable summary.
std::string cmd_generate(const Manifest& manifest);
std::string cmd_train(const Manifest& manifest);
std::string cmd_evaluate(const Manifest& manifest);
std::string cmd_sweep(const Manifest& manifest);
std::string cmd_powerflow(const Manifest& manifest);
std::string cmd_report(const Manifest& manifest);

std::string run_command(const std::string& command, const Manifest& manifest);

}  // namespace loadalloc
