#include "loadalloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "loadalloc/auxiliary.hpp"
#include "loadalloc/error.hpp"
#include "text_format.hpp"

namespace loadalloc {

using detail::fmt_double;
using detail::fmt_optional;

RegionMetrics region_metrics(Id region_id, std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw ValidationError("predicted and actual vectors differ in length");
  if (predicted.empty()) throw ValidationError("region " + std::to_string(region_id) + " has no substations");
  RegionMetrics m;
  m.region_id = region_id;
  double sq = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - actual[i];
    sq += e * e;
    ab += std::abs(e);
  }
  const auto n = static_cast<double>(predicted.size());
  m.rmse = std::sqrt(sq / n);
  m.mae = ab / n;
  // The two norms can cross by an ulp when every residual has the same size.
  if (m.mae > m.rmse) m.mae = m.rmse;
  m.corr = pearson(predicted, actual);
  return m;
}

std::vector<RegionMetrics> scenario_metrics(std::span<const double> predicted, const Scenario& scenario) {
  const auto& subs = scenario.substations();
  if (predicted.size() != subs.size()) throw ValidationError("prediction does not cover every substation");
  std::vector<RegionMetrics> out;
  out.reserve(scenario.regions().size());
  std::vector<double> p, a;
  for (std::size_t r = 0; r < scenario.regions().size(); ++r) {
    p.clear();
    a.clear();
    for (std::size_t j : scenario.region_substations(r)) {
      p.push_back(predicted[j]);
      a.push_back(subs[j].demand_actual);
    }
    out.push_back(region_metrics(scenario.regions()[r].id, p, a));
  }
  return out;
}

const char* metric_name(Metric metric) {
  switch (metric) {
    case Metric::Rmse:
      return "rmse";
    case Metric::Mae:
      return "mae";
    case Metric::Corr:
      return "corr";
  }
  return "?";
}

std::optional<double> metric_value(const RegionMetrics& m, Metric metric) {
  switch (metric) {
    case Metric::Rmse:
      return m.rmse;
    case Metric::Mae:
      return m.mae;
    case Metric::Corr:
      return m.corr;
  }
  return std::nullopt;
}

std::vector<std::string> EvalReport::methods() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& row : rows) {
    if (seen.insert(row.method).second) out.push_back(row.method);
  }
  return out;
}

std::vector<std::uint64_t> EvalReport::seeds() const {
  std::set<std::uint64_t> s;
  for (const auto& row : rows) s.insert(row.seed);
  return {s.begin(), s.end()};
}

bool EvalReport::has_method(const std::string& method) const {
  return std::any_of(rows.begin(), rows.end(), [&](const MetricRow& r) { return r.method == method; });
}

std::vector<RegionMetrics> seed_metrics(const EvalReport& report, const std::string& method, std::uint64_t seed) {
  std::vector<RegionMetrics> out;
  for (const auto& row : report.rows) {
    if (row.method == method && row.seed == seed) out.push_back(row.metrics);
  }
  std::sort(out.begin(), out.end(), [](const RegionMetrics& a, const RegionMetrics& b) { return a.region_id < b.region_id; });
  return out;
}

std::vector<RegionMetrics> seed_averaged(const EvalReport& report, const std::string& method) {
  struct Acc {
    double rmse = 0.0, mae = 0.0, corr = 0.0;
    std::size_t n = 0, n_corr = 0;
  };
  // Seeds are visited in sorted order so the sums do not depend on row order.
  std::map<Id, std::map<std::uint64_t, RegionMetrics>> by_region;
  for (const auto& row : report.rows) {
    if (row.method != method) continue;
    if (!by_region[row.metrics.region_id].emplace(row.seed, row.metrics).second)
      throw ValidationError("duplicate metrics for method " + method + ", region " +
                            std::to_string(row.metrics.region_id));
  }
  if (by_region.empty()) throw ValidationError("report has no rows for method " + method);
  std::vector<RegionMetrics> out;
  for (const auto& [region_id, seeds] : by_region) {
    Acc acc;
    for (const auto& [seed, m] : seeds) {
      acc.rmse += m.rmse;
      acc.mae += m.mae;
      ++acc.n;
      if (m.corr) {
        acc.corr += *m.corr;
        ++acc.n_corr;
      }
    }
    RegionMetrics avg;
    avg.region_id = region_id;
    avg.rmse = acc.rmse / static_cast<double>(acc.n);
    avg.mae = acc.mae / static_cast<double>(acc.n);
    if (acc.n_corr > 0) avg.corr = acc.corr / static_cast<double>(acc.n_corr);
    out.push_back(avg);
  }
  return out;
}

namespace {

MetricSummary summarize(std::span<const RegionMetrics> regions, Metric metric) {
  std::vector<double> values;
  MetricSummary s;
  for (const auto& m : regions) {
    if (auto v = metric_value(m, metric)) {
      values.push_back(*v);
    } else {
      ++s.n_missing;
    }
  }
  s.n = values.size();
  s.mean = values.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(values);
  s.std = sample_std(values);
  return s;
}

std::vector<RegionMetrics> sorted_by_region(std::span<const RegionMetrics> regions) {
  std::vector<RegionMetrics> out(regions.begin(), regions.end());
  std::sort(out.begin(), out.end(), [](const RegionMetrics& a, const RegionMetrics& b) { return a.region_id < b.region_id; });
  return out;
}

// Aligned metric pairs for regions present in both sets with both values defined.
void paired_values(std::span<const RegionMetrics> a, std::span<const RegionMetrics> b, Metric metric,
                   std::vector<double>& xa, std::vector<double>& xb) {
  xa.clear();
  xb.clear();
  if (a.size() != b.size()) throw ValidationError("compared methods cover different regions");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].region_id != b[i].region_id) throw ValidationError("compared methods cover different regions");
    const auto va = metric_value(a[i], metric);
    const auto vb = metric_value(b[i], metric);
    if (va && vb) {
      xa.push_back(*va);
      xb.push_back(*vb);
    }
  }
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 1.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MethodAggregate aggregate(const std::string& method, std::span<const RegionMetrics> regions) {
  const auto sorted = sorted_by_region(regions);
  return {method, summarize(sorted, Metric::Rmse), summarize(sorted, Metric::Mae), summarize(sorted, Metric::Corr)};
}

MethodAggregate aggregate(const EvalReport& report, const std::string& method) {
  const auto averaged = seed_averaged(report, method);
  return aggregate(method, averaged);
}

MarginalEffect marginal_effect(double base_rmse, double augmented_rmse) {
  if (!std::isfinite(base_rmse) || !std::isfinite(augmented_rmse)) throw ValidationError("RMSE must be finite");
  MarginalEffect e;
  e.delta = augmented_rmse - base_rmse;
  e.percent = base_rmse != 0.0 ? 100.0 * e.delta / base_rmse : 0.0;
  return e;
}

MarginalEffect marginal_effect(std::span<const RegionMetrics> base, std::span<const RegionMetrics> augmented) {
  const auto b = sorted_by_region(base);
  const auto a = sorted_by_region(augmented);
  if (a.size() != b.size()) throw ValidationError("marginal effect needs the same region set");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].region_id != b[i].region_id) throw ValidationError("marginal effect needs the same region set");
  }
  return marginal_effect(summarize(b, Metric::Rmse).mean, summarize(a, Metric::Rmse).mean);
}

std::string format_marginal_effect(const MarginalEffect& effect) {
  // Round first so that -0.00 never shows up with a sign.
  const double d = std::round(effect.delta * 100.0) / 100.0;
  const double p = std::round(effect.percent * 10.0) / 10.0;
  auto signed_text = [](double v, int decimals) {
    std::string s = detail::fmt_fixed(std::abs(v), decimals);
    if (v > 0.0) return "+" + s;
    if (v < 0.0) return "-" + s;
    return s;
  };
  return signed_text(d, 2) + " (" + signed_text(p, 1) + "%)";
}

std::vector<PlannedComparison> default_planned_comparisons() {
  return {{"GNN", "GPM"},           {"GNNpostP", "GNN"},       {"GNNpostN", "GNN"},
          {"GNNpostNP", "GNNpostP"}, {"GPMpostNP", "GPMpostN"}, {"GPMpostP", "GPM"},
          {"GPMpostNP", "GPMpostP"}, {"GNNpriorN", "GNN"},      {"GNNpostP", "GPMpostNP"}};
}

std::vector<ComparisonResult> planned_comparisons(const EvalReport& report,
                                                  std::span<const PlannedComparison> comparisons,
                                                  Metric metric) {
  std::vector<ComparisonResult> out;
  for (const auto& c : comparisons) {
    if (!report.has_method(c.method_a) || !report.has_method(c.method_b)) continue;
    ComparisonResult r;
    r.pair = c;
    r.metric = metric;
    out.push_back(r);
  }
  if (out.empty()) return out;

  std::vector<double> xa, xb;
  for (std::uint64_t seed : report.seeds()) {
    std::vector<double> family;
    for (auto& r : out) {
      const auto a = seed_metrics(report, r.pair.method_a, seed);
      const auto b = seed_metrics(report, r.pair.method_b, seed);
      paired_values(a, b, metric, xa, xb);
      const auto w = wilcoxon_signed_rank(xa, xb);
      if (w.n < 5) r.underpowered = true;
      r.per_seed_p.push_back(w.p_value);
      family.push_back(w.p_value);
    }
    const auto adjusted = holm_bonferroni(family);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].per_seed_holm.push_back(adjusted[i]);
  }

  std::vector<double> family;
  for (auto& r : out) {
    const auto a = seed_averaged(report, r.pair.method_a);
    const auto b = seed_averaged(report, r.pair.method_b);
    paired_values(a, b, metric, xa, xb);
    r.n_pairs = xa.size();
    r.delta = (xa.empty() ? 0.0 : mean(xa) - mean(xb));
    family.push_back(wilcoxon_signed_rank(xa, xb).p_value);
    r.median_holm_p = median_of(r.per_seed_holm);
    r.significant = r.median_holm_p < kSignificanceLevel;
  }
  const auto adjusted = holm_bonferroni(family);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].seed_averaged_holm_p = adjusted[i];
  return out;
}

double region_load_density(const Region& region) { return region.demand_total / region.area_km2; }

double landuse_entropy(const LandUseVector& shares) {
  double h = 0.0;
  for (double p : shares) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

LandUseVector region_mean_landuse(const Scenario& scenario, std::size_t region) {
  LandUseVector m{};
  const auto members = scenario.region_agents(region);
  for (std::size_t a : members) {
    for (std::size_t k = 0; k < kLandUseClasses; ++k) m[k] += scenario.agents()[a].landuse[k];
  }
  for (double& v : m) v /= static_cast<double>(members.size());
  return m;
}

std::vector<StratumRow> stratify(const EvalReport& report, const Scenario& scenario, const StratifyConfig& config) {
  const std::size_t n_regions = scenario.regions().size();
  std::vector<double> density(n_regions), entropy(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) {
    density[r] = region_load_density(scenario.regions()[r]);
    entropy[r] = landuse_entropy(region_mean_landuse(scenario, r));
  }
  std::array<double, 2> dbreaks{};
  if (config.density_breaks) {
    dbreaks = *config.density_breaks;
  } else {
    dbreaks = {{percentile(density, 100.0 / 3.0), percentile(density, 200.0 / 3.0)}};
  }
  const double ebreak = config.entropy_break ? *config.entropy_break : percentile(entropy, 50.0);

  std::map<Id, std::pair<int, int>> band;
  for (std::size_t r = 0; r < n_regions; ++r) {
    const int d = density[r] <= dbreaks[0] ? 0 : (density[r] >= dbreaks[1] ? 2 : 1);
    const int e = entropy[r] <= ebreak ? 0 : 1;
    band[scenario.regions()[r].id] = {d, e};
  }

  std::vector<StratumRow> out;
  for (const auto& method : report.methods()) {
    const auto averaged = seed_averaged(report, method);
    std::set<Id> covered;
    std::array<std::array<std::vector<double>, 2>, 3> cells;
    for (const auto& m : averaged) {
      auto it = band.find(m.region_id);
      if (it == band.end())
        throw ValidationError("report region " + std::to_string(m.region_id) + " is not in the scenario");
      covered.insert(m.region_id);
      cells[static_cast<std::size_t>(it->second.first)][static_cast<std::size_t>(it->second.second)].push_back(m.rmse);
    }
    if (covered.size() != n_regions) throw ValidationError("report for " + method + " does not cover every region");
    for (int d = 0; d < 3; ++d) {
      for (int e = 0; e < 2; ++e) {
        const auto& v = cells[static_cast<std::size_t>(d)][static_cast<std::size_t>(e)];
        StratumRow row{method, d, e, v.size(), std::nullopt};
        if (!v.empty()) row.mean_rmse = mean(v);
        out.push_back(row);
      }
    }
  }
  return out;
}

JackknifeSummary jackknife_loo_corr(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw ValidationError("predicted and actual vectors differ in length");
  if (predicted.size() < 4) throw ValidationError("jackknife needs at least four points");
  JackknifeSummary out;
  out.full = pearson(predicted, actual);
  std::vector<double> p, a, valid;
  for (std::size_t skip = 0; skip < predicted.size(); ++skip) {
    p.clear();
    a.clear();
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      if (i == skip) continue;
      p.push_back(predicted[i]);
      a.push_back(actual[i]);
    }
    const auto c = pearson(p, a);
    out.loo.push_back(c);
    if (c) {
      valid.push_back(*c);
      if (!out.min || *c < *out.min) {
        out.min = c;
        out.argmin = skip;
      }
    }
  }
  out.std = sample_std(valid);
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "method,region_id,rmse,mae,corr\n";
  for (const auto& method : report.methods()) {
    for (const auto& m : seed_averaged(report, method)) {
      out += method + "," + std::to_string(m.region_id) + "," + fmt_double(m.rmse) + "," + fmt_double(m.mae) + "," +
             fmt_optional(m.corr) + "\n";
    }
  }
  return out;
}

std::string report_seed_csv(const EvalReport& report) {
  std::string out = "method,seed,region_id,rmse,mae,corr\n";
  for (const auto& method : report.methods()) {
    for (std::uint64_t seed : report.seeds()) {
      for (const auto& m : seed_metrics(report, method, seed)) {
        out += method + "," + std::to_string(seed) + "," + std::to_string(m.region_id) + "," + fmt_double(m.rmse) +
               "," + fmt_double(m.mae) + "," + fmt_optional(m.corr) + "\n";
      }
    }
  }
  return out;
}

EvalReport parse_report_seed_csv(const std::string& text) {
  EvalReport report;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    return ValidationError("metrics table line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "method,seed,region_id,rmse,mae,corr") throw fail("unexpected header");
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 6) throw fail("expected 6 columns");
    MetricRow row;
    row.method = cells[0];
    try {
      std::size_t used = 0;
      row.seed = std::stoull(cells[1], &used);
      row.metrics.region_id = std::stoll(cells[2]);
      row.metrics.rmse = std::stod(cells[3]);
      row.metrics.mae = std::stod(cells[4]);
      if (!cells[5].empty()) row.metrics.corr = std::stod(cells[5]);
    } catch (const std::exception&) {
      throw fail("malformed number");
    }
    report.rows.push_back(std::move(row));
  }
  if (line_no == 0) throw ValidationError("metrics table is empty");
  return report;
}

namespace {

nlohmann::ordered_json summary_json(const MetricSummary& s) {
  nlohmann::ordered_json j;
  j["mean"] = std::isfinite(s.mean) ? nlohmann::ordered_json(s.mean) : nlohmann::ordered_json(nullptr);
  j["std"] = s.std;
  j["n"] = s.n;
  j["n_missing"] = s.n_missing;
  return j;
}

}  // namespace

std::string report_summary_json(const EvalReport& report, std::span<const PlannedComparison> comparisons) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  std::vector<std::uint64_t> seeds = report.seeds();
  j["seeds"] = seeds;
  nlohmann::ordered_json methods = nlohmann::ordered_json::array();
  for (const auto& name : report.methods()) {
    const auto agg = aggregate(report, name);
    methods.push_back({{"method", name},
                       {"rmse", summary_json(agg.rmse)},
                       {"mae", summary_json(agg.mae)},
                       {"corr", summary_json(agg.corr)}});
  }
  j["methods"] = std::move(methods);
  nlohmann::ordered_json tests = nlohmann::ordered_json::array();
  for (Metric metric : {Metric::Rmse, Metric::Mae, Metric::Corr}) {
    for (const auto& r : planned_comparisons(report, comparisons, metric)) {
      tests.push_back({{"a", r.pair.method_a},
                       {"b", r.pair.method_b},
                       {"metric", metric_name(metric)},
                       {"delta", r.delta},
                       {"n_pairs", r.n_pairs},
                       {"per_seed_p", r.per_seed_p},
                       {"per_seed_holm_p", r.per_seed_holm},
                       {"median_holm_p", r.median_holm_p},
                       {"seed_averaged_holm_p", r.seed_averaged_holm_p},
                       {"underpowered", r.underpowered},
                       {"significant", r.significant}});
    }
  }
  j["comparisons"] = std::move(tests);
  return j.dump(2) + "\n";
}

}  // namespace loadalloc
