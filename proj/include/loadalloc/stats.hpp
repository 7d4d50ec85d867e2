#pragma once

#include <optional>
#include <span>
#include <vector>

namespace loadalloc {

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Empty when either vector has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> values);

enum class Alternative { TwoSided, Greater, Less };

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;  ///< sum of ranks of positive differences a - b
  std::size_t n = 0;    ///< pairs left after dropping zero differences
  bool exact = true;
  bool degenerate = false;  ///< every difference was zero
};

/// Paired signed-rank test on a - b. Exact null distribution (with average
/// ranks for ties) up to n = 20, tie- and continuity-corrected normal
/// approximation above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    Alternative alternative = Alternative::TwoSided);

inline constexpr std::size_t kWilcoxonExactLimit = 20;

/// Holm step-down adjustment, returned in input order.
std::vector<double> holm_bonferroni(std::span<const double> p_values);

}  // namespace loadalloc
