#pragma once

#include <span>
#include <string>

#include "loadalloc/evaluation.hpp"

namespace loadalloc {

/// Method matrix: RMSE / MAE / Corr as mean +- inter-region std, grouped by base,
/// followed by the planned comparisons on RMSE.
std::string render_method_table(const EvalReport& report, std::span<const PlannedComparison> comparisons);

/// Mechanism isolation on the learned base: controls, no-renorm, noise and additive rows.
std::string render_isolation_table(const EvalReport& report);

/// Marginal RMSE effect of NTL, Proximity and both on each base and integration path.
std::string render_marginal_table(const EvalReport& report);

/// All three tables.
std::string render_report(const EvalReport& report, std::span<const PlannedComparison> comparisons);

}  // namespace loadalloc
