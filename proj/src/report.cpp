#include "loadalloc/report.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "text_format.hpp"

namespace loadalloc {

namespace {

using detail::fmt_fixed;

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

std::string mean_std(const MetricSummary& s, int decimals) {
  if (s.n == 0 || !std::isfinite(s.mean)) return "n/a";
  std::string out = fmt_fixed(s.mean, decimals) + " +- " + fmt_fixed(s.std, decimals);
  if (s.n_missing > 0) out += " (" + std::to_string(s.n_missing) + " missing)";
  return out;
}

std::string p_text(double p) {
  char buf[32];
  if (p >= 0.01) {
    std::snprintf(buf, sizeof buf, "%.2f", p);
  } else {
    std::snprintf(buf, sizeof buf, "%.1e", p);
  }
  return buf;
}

std::string signed_fixed(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double r = std::round(v * scale) / scale;
  std::string s = fmt_fixed(std::abs(r), decimals);
  if (r > 0.0) return "+" + s;
  if (r < 0.0) return "-" + s;
  return s;
}

const char* base_label(const std::string& method) {
  if (method.rfind("Uni", 0) == 0) return "Uniform base";
  if (method.rfind("GPM", 0) == 0) return "GPM base";
  if (method.rfind("GNN", 0) == 0) return "Learned base";
  return "Other";
}

}  // namespace

std::string render_method_table(const EvalReport& report, std::span<const PlannedComparison> comparisons) {
  std::string out = "Method matrix (mean +- inter-region std; learned methods seed-averaged first)\n\n";
  out += pad("Method", 14) + pad("RMSE", 22) + pad("MAE", 22) + "Corr\n";
  std::string group;
  for (const auto& method : report.methods()) {
    if (method.find('@') != std::string::npos) continue;
    const std::string g = base_label(method);
    if (g != group) {
      if (!group.empty()) out += "\n";
      out += "[" + g + "]\n";
      group = g;
    }
    const auto a = aggregate(report, method);
    out += pad(method, 14) + pad(mean_std(a.rmse, 2), 22) + pad(mean_std(a.mae, 2), 22) + mean_std(a.corr, 3) + "\n";
  }

  const auto tests = planned_comparisons(report, comparisons, Metric::Rmse);
  if (!tests.empty()) {
    out += "\nPlanned comparisons (Wilcoxon signed-rank, Holm-adjusted per seed, median over seeds)\n\n";
    out += pad("#", 4) + pad("Comparison", 26) + lpad("dRMSE", 8) + lpad("Holm p", 10) + "  Sig.\n";
    for (std::size_t i = 0; i < tests.size(); ++i) {
      const auto& t = tests[i];
      out += pad(std::to_string(i + 1), 4) + pad(t.pair.method_a + " vs " + t.pair.method_b, 26) +
             lpad(signed_fixed(t.delta, 2), 8) + lpad(p_text(t.median_holm_p), 10) + "  " +
             (t.significant ? "yes" : "-") + (t.underpowered ? " (n<5)" : "") + "\n";
    }
  }
  return out;
}

std::string render_isolation_table(const EvalReport& report) {
  struct Row {
    const char* section;
    const char* label;
    const char* method;
    const char* form;
  };
  static const std::vector<Row> rows{
      {"Controls", "Learned baseline (no correction)", "GNN", "-"},
      {"Controls", "Learned + NTLxProx (Mult.)", "GNNpostNP", "Mult.+renorm"},
      {"Controls", "Learned + NTL only (Mult.)", "GNNpostN", "Mult.+renorm"},
      {"Controls", "Learned + Prox only (Mult.)", "GNNpostP", "Mult.+renorm"},
      {"Exp 1: removing re-normalization", "No-renorm NTLxProx", "GNNrawNP", "Mult."},
      {"Exp 1: removing re-normalization", "No-renorm NTL only", "GNNrawN", "Mult."},
      {"Exp 1: removing re-normalization", "No-renorm Prox only", "GNNrawP", "Mult."},
      {"Exp 2: random-noise post-correction", "Random noise (repeats avg.)", "GNNnoiseNP", "Mult.+renorm"},
      {"Exp 3: additive post-correction", "Additive NTLxProx", "GNNaddNP", "Add.+renorm"},
      {"Exp 3: additive post-correction", "Additive NTL only", "GNNaddN", "Add.+renorm"},
      {"Exp 3: additive post-correction", "Additive Prox only", "GNNaddP", "Add.+renorm"},
  };
  if (!report.has_method("GNN")) return "Mechanism isolation: no learned baseline in this report\n";
  const auto base = aggregate(report, "GNN");
  std::string out = "Mechanism isolation on the learned base (dRMSE relative to the uncorrected baseline)\n\n";
  out += pad("Correction", 36) + pad("Form", 14) + pad("RMSE", 18) + pad("dRMSE", 18) + pad("MAE", 18) + "Corr\n";
  std::string section;
  for (const auto& row : rows) {
    if (!report.has_method(row.method)) continue;
    if (section != row.section) {
      out += std::string(row.section) + "\n";
      section = row.section;
    }
    const auto a = aggregate(report, row.method);
    const std::string delta =
        std::string(row.method) == "GNN" ? "-" : format_marginal_effect(marginal_effect(base.rmse.mean, a.rmse.mean));
    out += pad(std::string("  ") + row.label, 36) + pad(row.form, 14) + pad(mean_std(a.rmse, 2), 18) + pad(delta, 18) +
           pad(mean_std(a.mae, 2), 18) + mean_std(a.corr, 3) + "\n";
  }
  return out;
}

std::string render_marginal_table(const EvalReport& report) {
  struct Column {
    const char* title;
    const char* base;
    const char* prefix;
  };
  static const std::vector<Column> columns{{"Uniform base", "Uni", "Uni"},
                                           {"GPM base", "GPM", "GPMpost"},
                                           {"Learned post-corr.", "GNN", "GNNpost"},
                                           {"Learned prior loss", "GNN", "GNNprior"}};
  static const std::vector<std::pair<const char*, const char*>> components{
      {"NTL", "N"}, {"Proximity", "P"}, {"NTL+Prox", "NP"}};
  std::string out = "Marginal RMSE effect of each component, measured from the unmodified base\n\n";
  out += pad("Component", 12);
  for (const auto& c : columns) out += pad(c.title, 22);
  out += "\n";
  for (const auto& [label, suffix] : components) {
    out += pad(label, 12);
    for (const auto& c : columns) {
      const std::string method = std::string(c.prefix) + suffix;
      if (!report.has_method(c.base) || !report.has_method(method)) {
        out += pad("n/a", 22);
        continue;
      }
      const auto b = seed_averaged(report, c.base);
      const auto m = seed_averaged(report, method);
      out += pad(format_marginal_effect(marginal_effect(b, m)), 22);
    }
    out += "\n";
  }
  return out;
}

std::string render_report(const EvalReport& report, std::span<const PlannedComparison> comparisons) {
  return render_method_table(report, comparisons) + "\n" + render_marginal_table(report) + "\n" +
         render_isolation_table(report);
}

}  // namespace loadalloc
