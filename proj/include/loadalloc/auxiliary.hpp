#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "loadalloc/model.hpp"
#include "loadalloc/weighting.hpp"

namespace loadalloc {

enum class FactorKind { Ntl, Proximity, Combined, Noise };

/// Constants a factor field was computed with.
struct FactorParams {
  double epsilon = 0.0;  ///< NTL floor (5th percentile of non-zero RCI radiance)
  double median = 0.0;   ///< reference median of the raw value over RCI agents
  double gamma = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
  std::uint64_t noise_seed = 0;
  /// Set when the NTL fallback constants were used.
  bool degenerate_fallback = false;
};

/// Strictly positive per-agent factors indexed like Scenario::agents().
struct CorrectionFactorField {
  std::vector<double> factor;
  FactorKind kind = FactorKind::Ntl;
  FactorParams params;
};

inline constexpr double kProximityClampKm = 0.01;

/// Lower median (element (n-1)/2 of the sorted values).
double lower_median(std::vector<double> values);
/// Linear-interpolated percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

/// log(1 + ntl + eps) / log(1 + median), raised to `alpha`.
CorrectionFactorField ntl_factor(const Scenario& scenario, double alpha = 1.0);

/// Sum over every substation (all regions) of max(dist, 10 m)^-gamma.
double prox_score(const Agent& agent, std::span<const Substation> substations, double gamma);
std::vector<double> prox_scores(const Scenario& scenario, double gamma);

/// log(1 + prox) / log(1 + median prox over RCI agents).
CorrectionFactorField prox_factor(const Scenario& scenario, double gamma = 2.0);

/// (f1 * f2)^beta.
CorrectionFactorField combine_factors(const CorrectionFactorField& f1, const CorrectionFactorField& f2,
                                      double beta = 1.0);

/// Per-source target over the source's RCI agents, laid out like
/// SourceWeights (zeros for non-RCI agents). A source without RCI agents gets
/// an all-zero row and is skipped by the prior loss.
SourceWeights prior_target(const Scenario& scenario, std::span<const double> values);

}  // namespace loadalloc
