#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "loadalloc/model.hpp"

namespace loadalloc {

/// Synthetic ground-truth world. Every region has a latent urbanization field
/// (Gaussian bumps over a background) that drives true demand; land use, NTL
/// and substation siting observe that field with tunable fidelity.
struct SynthConfig {
  std::uint64_t seed = 42;
  int n_regions = 16;
  int agents_per_region = 2000;
  int substations_per_region = 120;
  int urbanization_clusters = 3;

  /// How strongly land use follows the demand field (what a learned base can recover).
  double base_signal = 0.8;
  /// How faithfully radiance tracks the demand field.
  double ntl_fidelity = 0.7;
  /// Probability that a substation is sited by urbanization rather than uniformly.
  double prox_fidelity = 0.9;

  double demand_exponent = 1.0;
  double demand_noise = 0.3;      ///< log-sd of agent demand around the field
  double landuse_noise = 0.5;     ///< sd of the per-class logit noise
  double ntl_noise = 0.2;         ///< log-sd of radiance
  double ntl_exponent = 2.0;
  double ntl_dark_threshold = 0.03;  ///< field level below which radiance reads zero
  double background = 0.1;

  /// Substations per km^2; sets the region side.
  double substation_density = 0.012;
  /// Regional load density range, MVA/km^2.
  double load_density_min = 0.2;
  double load_density_max = 0.5;
};

void validate(const SynthConfig& config);

struct GeneratedScenario {
  Scenario scenario;
  /// True demand per agent (MVA), indexed like scenario.agents().
  std::vector<double> agent_demand;
};

GeneratedScenario generate(const SynthConfig& config);

/// Reads regions.csv, agents.csv and substations.csv (or their .gz variants) from `dir`.
Scenario load_scenario(const std::filesystem::path& dir);
void save_scenario(const Scenario& scenario, const std::filesystem::path& dir, bool gzip = false);

/// Whole-file text I/O; paths ending in .gz are (de)compressed.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace loadalloc
