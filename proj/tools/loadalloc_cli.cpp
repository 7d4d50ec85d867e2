#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "loadalloc/loadalloc.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int exit_code(la_status status) {
  switch (status) {
    case LA_OK:
      return kExitOk;
    case LA_ERR_RUNTIME:
      return kExitRuntime;
    default:
      return kExitValidation;
  }
}

struct Options {
  std::string manifest;
  std::string output_dir;
  std::optional<unsigned> workers;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> cv_seeds;
  std::string methods;
  bool verbose = false;
  std::string axis;
  std::vector<double> levels;
  std::optional<std::int64_t> region;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

json& object_at(json& root, const char* key) {
  if (!root.contains(key) || !root[key].is_object()) root[key] = json::object();
  return root[key];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial disaggregation of regional electricity demand to substations"};
  app.set_version_flag("--version", std::string(la_version()));
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("-m,--manifest", o.manifest, "Experiment manifest (JSON); defaults apply when omitted");
  app.add_option("-o,--output-dir", o.output_dir,
                 "Output directory (overrides the manifest; LOADALLOC_OUTPUT_DIR sets the default)");
  app.add_option("-j,--workers", o.workers, "Worker threads (0: all logical cores)");
  app.add_option("-s,--seed", o.seed, "Seed of the synthetic scenario");
  app.add_option("--cv-seeds", o.cv_seeds, "Cross-validation seeds")->delimiter(',');
  app.add_flag("-v,--verbose", o.verbose, "Print the resolved manifest to stderr");

  auto* gen = app.add_subcommand("generate", "Generate a synthetic scenario with known ground truth");
  auto* train = app.add_subcommand("train", "Train the learned allocators for every seed and fold");
  auto* eval = app.add_subcommand("evaluate", "Cross-validated evaluation of the method matrix");
  auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep over alpha, gamma, beta or lambda");
  auto* pf = app.add_subcommand("powerflow", "AC power-flow validation on one region");
  auto* report = app.add_subcommand("report", "Render the result tables from stored metrics");
  (void)gen;
  (void)report;
  for (auto* sub : {train, eval})
    sub->add_option("--methods", o.methods, "Comma-separated method names (default: full matrix)");
  sweep->add_option("--axis", o.axis, "alpha, gamma, beta or lambda");
  sweep->add_option("--levels", o.levels, "Comma-separated levels")->delimiter(',');
  sweep->add_option("--methods", o.methods, "Comma-separated methods to sweep");
  pf->add_option("--region", o.region, "Region id (default: first region)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  json manifest = json::object();
  fs::path base_dir = fs::current_path();
  if (!o.manifest.empty()) {
    std::ifstream in(o.manifest, std::ios::binary);
    if (!in) {
      std::cerr << "error: cannot open manifest " << o.manifest << "\n";
      return kExitValidation;
    }
    try {
      manifest = json::parse(in);
    } catch (const json::parse_error& e) {
      std::cerr << "error: manifest " << o.manifest << " is not valid JSON: " << e.what() << "\n";
      return kExitValidation;
    }
    if (!manifest.is_object()) {
      std::cerr << "error: manifest " << o.manifest << " must be a JSON object\n";
      return kExitValidation;
    }
    base_dir = fs::absolute(o.manifest).parent_path();
  }

  if (!o.output_dir.empty()) {
    manifest["output_dir"] = fs::absolute(o.output_dir).string();
  } else if (!manifest.contains("output_dir")) {
    if (const char* env = std::getenv("LOADALLOC_OUTPUT_DIR"); env && *env)
      manifest["output_dir"] = fs::absolute(env).string();
  }
  if (o.workers) manifest["workers"] = *o.workers;
  if (o.seed) object_at(manifest, "synthetic")["seed"] = *o.seed;
  if (!o.cv_seeds.empty()) object_at(manifest, "plan")["seeds"] = o.cv_seeds;
  if (command == "sweep") {
    json& s = object_at(manifest, "sweep");
    if (!o.axis.empty()) s["axis"] = o.axis;
    if (!o.levels.empty()) s["levels"] = o.levels;
    if (!o.methods.empty()) s["methods"] = split_list(o.methods);
  } else if (!o.methods.empty()) {
    manifest["methods"] = split_list(o.methods);
  }
  if (o.region) object_at(manifest, "powerflow")["region_id"] = *o.region;

  const std::string text = manifest.dump();
  const std::string base = base_dir.string();
  if (o.verbose) {
    char* normalized = nullptr;
    if (la_manifest_normalize(text.c_str(), base.c_str(), &normalized) == LA_OK) {
      std::cerr << normalized;
      la_free_string(normalized);
    }
  }

  char* out = nullptr;
  const la_status status = la_run_command(command.c_str(), text.c_str(), base.c_str(), &out);
  if (status != LA_OK) {
    std::cerr << "error: " << la_last_error() << "\n";
    return exit_code(status);
  }
  if (out) {
    std::cout << out;
    la_free_string(out);
  }
  return kExitOk;
}
