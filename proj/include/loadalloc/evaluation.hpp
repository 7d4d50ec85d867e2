#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadalloc/model.hpp"
#include "loadalloc/stats.hpp"

namespace loadalloc {

struct RegionMetrics {
  Id region_id = 0;
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> corr;
};

RegionMetrics region_metrics(Id region_id, std::span<const double> predicted, std::span<const double> actual);

/// Metrics for every region, in scenario region order.
std::vector<RegionMetrics> scenario_metrics(std::span<const double> predicted_substation_demand,
                                            const Scenario& scenario);

enum class Metric { Rmse, Mae, Corr };
const char* metric_name(Metric metric);
std::optional<double> metric_value(const RegionMetrics& m, Metric metric);

struct MetricRow {
  std::string method;
  std::uint64_t seed = 0;
  RegionMetrics metrics;
};

/// Raw per-seed, per-region metrics for a set of methods.
struct EvalReport {
  std::vector<MetricRow> rows;

  /// Method labels in order of first appearance.
  std::vector<std::string> methods() const;
  std::vector<std::uint64_t> seeds() const;
  bool has_method(const std::string& method) const;
};

/// Per-region metrics averaged over seeds, sorted by region id. Corr averages
/// the seeds where it exists and stays missing when it never does.
std::vector<RegionMetrics> seed_averaged(const EvalReport& report, const std::string& method);

/// Per-region metrics of one seed, sorted by region id.
std::vector<RegionMetrics> seed_metrics(const EvalReport& report, const std::string& method, std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  ///< inter-region sample standard deviation
  std::size_t n = 0;
  std::size_t n_missing = 0;
};

struct MethodAggregate {
  std::string method;
  MetricSummary rmse;
  MetricSummary mae;
  MetricSummary corr;
};

/// Seed-average first, then mean and spread across regions.
MethodAggregate aggregate(const EvalReport& report, const std::string& method);
MethodAggregate aggregate(const std::string& method, std::span<const RegionMetrics> regions);

struct MarginalEffect {
  double delta = 0.0;
  double percent = 0.0;
};

MarginalEffect marginal_effect(double base_rmse, double augmented_rmse);
/// Compares the aggregate RMSE of two per-region metric sets over the same regions.
MarginalEffect marginal_effect(std::span<const RegionMetrics> base, std::span<const RegionMetrics> augmented);
/// "+1.93 (+20.8%)" style rendering: two decimals, one for the percentage.
std::string format_marginal_effect(const MarginalEffect& effect);

struct PlannedComparison {
  std::string method_a;
  std::string method_b;
};

/// The nine comparisons of the method-matrix study, each read as "a vs b".
std::vector<PlannedComparison> default_planned_comparisons();

struct ComparisonResult {
  PlannedComparison pair;
  Metric metric = Metric::Rmse;
  double delta = 0.0;  ///< aggregate(a) - aggregate(b) on seed-averaged metrics
  std::vector<double> per_seed_p;       ///< raw two-sided p per seed
  std::vector<double> per_seed_holm;    ///< Holm-adjusted within each seed's family
  double median_holm_p = 1.0;           ///< headline value
  double seed_averaged_holm_p = 1.0;    ///< same test on seed-averaged metrics
  std::size_t n_pairs = 0;
  bool underpowered = false;  ///< fewer than five usable pairs in some seed
  bool significant = false;   ///< median_holm_p < 0.05
};

/// Runs the comparisons whose methods are both present in the report; Holm is
/// applied over that family separately for each seed and metric.
std::vector<ComparisonResult> planned_comparisons(const EvalReport& report,
                                                  std::span<const PlannedComparison> comparisons,
                                                  Metric metric);

inline constexpr double kSignificanceLevel = 0.05;

/// Load-density breaks (MVA/km^2) and entropy split observed for the British regions.
inline constexpr std::array<double, 2> kBritishDensityBreaks{0.27, 0.41};
inline constexpr double kBritishEntropyBreak = 1.0;

struct StratifyConfig {
  /// low <= breaks[0] < mid < breaks[1] <= high. Empty: data-driven terciles.
  std::optional<std::array<double, 2>> density_breaks = kBritishDensityBreaks;
  /// low diversity <= break < high diversity. Empty: median of the regions.
  std::optional<double> entropy_break = kBritishEntropyBreak;
};

double region_load_density(const Region& region);
/// Shannon entropy with natural logarithm; zero entries contribute nothing.
double landuse_entropy(const LandUseVector& shares);
LandUseVector region_mean_landuse(const Scenario& scenario, std::size_t region);

struct StratumRow {
  std::string method;
  int density_band = 0;    ///< 0 low, 1 mid, 2 high
  int diversity_band = 0;  ///< 0 low, 1 high
  std::size_t n = 0;
  std::optional<double> mean_rmse;
};

std::vector<StratumRow> stratify(const EvalReport& report, const Scenario& scenario,
                                 const StratifyConfig& config = {});

struct JackknifeSummary {
  std::vector<std::optional<double>> loo;
  std::optional<double> full;
  std::optional<double> min;
  std::size_t argmin = 0;
  double std = 0.0;
};

JackknifeSummary jackknife_loo_corr(std::span<const double> predicted, std::span<const double> actual);

/// One row per method x region, seed-averaged.
std::string report_csv(const EvalReport& report);
/// One row per method x seed x region.
std::string report_seed_csv(const EvalReport& report);
/// Inverse of report_seed_csv.
EvalReport parse_report_seed_csv(const std::string& text);
/// Aggregates plus the planned comparisons on RMSE, MAE and Corr.
std::string report_summary_json(const EvalReport& report, std::span<const PlannedComparison> comparisons);

}  // namespace loadalloc
