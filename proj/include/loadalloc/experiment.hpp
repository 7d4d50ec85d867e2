#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "loadalloc/auxiliary.hpp"
#include "loadalloc/correction.hpp"
#include "loadalloc/evaluation.hpp"
#include "loadalloc/learner.hpp"
#include "loadalloc/model.hpp"

namespace loadalloc {

enum class BaseKind { Uniform, Gpm, Learned };

enum class Integration { None, PostMultiplicative, PostMultiplicativeRaw, PostAdditive, PostNoise, PriorLoss };

struct MethodSpec {
  std::string name;
  BaseKind base = BaseKind::Uniform;
  Integration integration = Integration::None;
  bool use_ntl = false;
  bool use_prox = false;
  double alpha = 1.0;
  double gamma = 2.0;
  double beta = 1.0;
  /// Prior weight; the training config's value when unset.
  std::optional<double> lambda;
  double additive_gain = 1.0;
  int noise_repeats = 10;
};

void validate(const MethodSpec& spec);

/// Accepts the method-matrix names (Uni, UniNP, GPMpostP, GNNpriorNP, ...) and
/// the isolation variants built from {Uni,GPM,GNN} + {post,raw,add,noise,prior} + {N,P,NP}.
MethodSpec parse_method(const std::string& name);
std::vector<std::string> method_matrix_names();
/// GNNrawNP, GNNaddNP, GNNnoiseNP and their single-factor forms.
std::vector<std::string> isolation_method_names();

/// Training settings a learned spec needs: priors only for PriorLoss.
TrainConfig training_config(const MethodSpec& spec, const TrainConfig& base);
/// Short stable tag of the priors in a training config ("plain", "prior-ntl0.05", ...).
std::string training_key(const TrainConfig& config);

/// Per-scenario caches shared by every method evaluated on it. Thread-safe.
class PipelineContext {
 public:
  explicit PipelineContext(const Scenario& scenario);

  const Scenario& scenario() const { return *scenario_; }
  const VoronoiAssignment& assignment() const { return assignment_; }
  const FeatureTable& features(double prox_gamma) const;
  /// The spec's correction factor: NTL, Proximity or their combination.
  const CorrectionFactorField& factor(const MethodSpec& spec) const;

 private:
  const CorrectionFactorField& ntl(double alpha) const;
  const CorrectionFactorField& prox(double gamma) const;

  const Scenario* scenario_;
  VoronoiAssignment assignment_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::unique_ptr<FeatureTable>> features_;
  mutable std::map<double, std::unique_ptr<CorrectionFactorField>> ntl_;
  mutable std::map<double, std::unique_ptr<CorrectionFactorField>> prox_;
  mutable std::map<std::string, std::unique_ptr<CorrectionFactorField>> combined_;
};

struct MethodOutput {
  /// Per-substation predictions; one entry per noise repeat, otherwise one.
  std::vector<std::vector<double>> substation_demand;
  bool conserving = true;
};

/// weighting -> correction -> Voronoi aggregation. Learned bases need `trained`.
MethodOutput run_method(const MethodSpec& spec, const PipelineContext& context, const TrainedAllocator* trained,
                        std::uint64_t noise_seed = 0);
MethodOutput run_method(const MethodSpec& spec, const Scenario& scenario, const TrainedAllocator* trained,
                        std::uint64_t noise_seed = 0);

/// Region metrics (scenario order), averaged over noise repeats.
std::vector<RegionMetrics> evaluate_output(const MethodOutput& output, const Scenario& scenario);

/// Largest relative |sum_j pred_j - D_r| / D_r over regions and repeats.
double prediction_conservation_error(const MethodOutput& output, const Scenario& scenario);

struct CVPlan {
  std::vector<std::uint64_t> seeds{42, 123, 456};
  int n_folds = 4;
  /// Train and evaluate on every region once per seed.
  bool single_pass = false;
  /// Restrict to these (seed, fold) pairs when non-empty.
  std::vector<std::pair<std::uint64_t, int>> only;
};

void validate(const CVPlan& plan, std::size_t n_regions);

/// Region positions per fold, shuffled by `seed`.
std::vector<std::vector<std::size_t>> fold_assignment(std::size_t n_regions, int n_folds, std::uint64_t seed);

struct AuditEntry {
  std::uint64_t seed = 0;
  int fold = 0;
  std::string model;
  std::vector<Id> train_region_ids;
  std::vector<Id> test_region_ids;
};

struct ProbeRecord {
  std::uint64_t seed = 0;
  int fold = 0;
  CorrelationSummary ntl;
  CorrelationSummary prox;
};

struct CVOptions {
  TrainConfig train;
  unsigned workers = 0;  ///< 0: hardware concurrency
  /// Reuse or store trained models here when set.
  std::optional<std::filesystem::path> model_dir;
};

struct CVResult {
  EvalReport report;
  std::vector<AuditEntry> audit;
  std::vector<ProbeRecord> probes;
  /// Worst relative conservation error per method.
  std::map<std::string, double> conservation_error;
};

CVResult run_cv(const CVPlan& plan, const Scenario& scenario, const std::vector<MethodSpec>& specs,
                const CVOptions& options = {});

/// Trains every distinct learned model the specs need, for every seed and fold.
struct TrainedModel {
  std::uint64_t seed = 0;
  int fold = 0;
  std::string key;
  TrainedAllocator allocator;
};
std::vector<TrainedModel> train_models(const CVPlan& plan, const Scenario& scenario,
                                       const std::vector<MethodSpec>& specs, const CVOptions& options = {});

std::string audit_csv(const std::vector<AuditEntry>& audit);
std::string probe_csv(const std::vector<ProbeRecord>& probes);

enum class SweepAxis { Alpha, Gamma, Beta, Lambda };
const char* sweep_axis_name(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& name);
std::vector<double> default_sweep_levels(SweepAxis axis);
/// Methods swept along an axis: alpha GNNpostN, gamma GNNpostP, beta GNNpostNP,
/// lambda GNNpriorN and GNNpriorP.
std::vector<std::string> default_sweep_methods(SweepAxis axis);

struct SweepRow {
  SweepAxis axis = SweepAxis::Alpha;
  double level = 0.0;
  std::string method;
  MethodAggregate aggregate;
};

struct SweepOptions {
  CVOptions cv;
  CVPlan plan;
  std::vector<std::string> methods;  ///< empty: default_sweep_methods(axis)
};

/// Post-correction axes reuse the base trained once per (seed, fold); lambda retrains per level.
std::vector<SweepRow> run_sweep(SweepAxis axis, const std::vector<double>& levels, const Scenario& scenario,
                                const SweepOptions& options);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace loadalloc
