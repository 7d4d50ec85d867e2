#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadalloc/auxiliary.hpp"
#include "loadalloc/model.hpp"
#include "loadalloc/weighting.hpp"

namespace loadalloc {

/// Agent feature layout: landuse(5), log(1+ntl), log(1+prox), x, y
/// (coordinates standardized per region).
inline constexpr std::size_t kFeatureCount = 9;
inline constexpr std::size_t kNtlFeature = 5;
inline constexpr std::size_t kProxFeature = 6;
/// Affine cost: one weight per feature plus a trailing bias.
inline constexpr std::size_t kParamCount = kFeatureCount + 1;

/// Row-major per-agent features, indexed like Scenario::agents().
struct FeatureTable {
  std::vector<double> values;
  std::size_t rows = 0;

  std::span<const double> row(std::size_t a) const { return {values.data() + a * kFeatureCount, kFeatureCount}; }
};

FeatureTable agent_features(const Scenario& scenario, double prox_gamma = 2.0);

struct CostModelParams {
  std::array<double, kParamCount> weights{};
  double temperature = 1.0;
  std::uint64_t init_seed = 0;
};

void validate(const CostModelParams& params);

struct TrainConfig {
  double lambda_ntl = 0.05;
  double lambda_prox = 0.05;
  double learning_rate = 1.0;
  int max_epochs = 400;
  double convergence_tol = 1e-10;
  std::uint64_t seed = 42;
  double temperature = 1.0;
  double init_scale = 0.01;
  /// Let the cost read the NTL and proximity columns. Off by default: the
  /// land-use objective then drives the cost onto raw radiance.
  bool feature_fusion = false;
  double prox_gamma = 2.0;
};

void validate(const TrainConfig& config);

struct LossRecord {
  double landuse = 0.0;
  double ntl_prior = 0.0;
  double prox_prior = 0.0;
  double total = 0.0;
};

struct TrainedAllocator {
  CostModelParams params;
  std::vector<LossRecord> loss_trace;
  bool converged = false;
  /// Ids of the regions whose data were used for training.
  std::vector<Id> train_region_ids;
  TrainConfig config;
};

/// Softmax over negative costs per source, with max-subtraction.
SourceWeights allocation_weights(const CostModelParams& params, const FeatureTable& features,
                                 const Scenario& scenario);

/// Mean over `sources` (all when empty) of KL(q_s || norm(sum_a w_sa M_a)).
double landuse_loss(const SourceWeights& weights, const Scenario& scenario, std::span<const std::size_t> sources = {});

/// Mean over sources with a non-empty target of sum_a q log(q / w).
double prior_loss(const SourceWeights& weights, const SourceWeights& targets,
                  std::span<const std::size_t> sources = {});

/// Everything the objective needs for one training set.
struct TrainingProblem {
  const Scenario* scenario = nullptr;
  FeatureTable features;
  SourceWeights ntl_targets;
  SourceWeights prox_targets;
  std::vector<std::size_t> sources;
};

TrainingProblem make_training_problem(const Scenario& scenario, std::span<const std::size_t> sources,
                                      double prox_gamma = 2.0);

struct LossAndGradient {
  LossRecord loss;
  std::array<double, kParamCount> gradient{};
};

/// L = L_landuse + lambda_ntl L_ntl + lambda_prox L_prox, with its analytic
/// gradient with respect to every cost parameter.
LossAndGradient total_loss(const CostModelParams& params, const TrainingProblem& problem, double lambda_ntl,
                           double lambda_prox);

/// Gradient descent with step-halving line search. Trains on `sources`
/// (region positions); all regions when empty.
TrainedAllocator train(const Scenario& scenario, const TrainConfig& config, std::span<const std::size_t> sources = {});
TrainedAllocator train(const TrainingProblem& problem, const TrainConfig& config);

struct CorrelationSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_sources = 0;
  std::size_t n_missing = 0;
  std::vector<std::optional<double>> per_source;
};

/// Spearman correlation between w_sa and f(a) within each source.
CorrelationSummary probe_weight_factor_correlation(const SourceWeights& weights, const CorrectionFactorField& factors,
                                                   const Scenario& scenario);

std::string to_json(const TrainedAllocator& allocator);
TrainedAllocator trained_allocator_from_json(const std::string& text);

}  // namespace loadalloc
