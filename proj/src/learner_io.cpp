#include <json.hpp>

#include "loadalloc/error.hpp"
#include "loadalloc/learner.hpp"

namespace loadalloc {

namespace {

constexpr int kFormatVersion = 1;

}  // namespace

std::string to_json(const TrainedAllocator& allocator) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["seed"] = allocator.params.init_seed;
  j["tau"] = allocator.params.temperature;
  j["weights"] = std::vector<double>(allocator.params.weights.begin(), allocator.params.weights.end());
  j["converged"] = allocator.converged;
  j["train_region_ids"] = allocator.train_region_ids;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& rec : allocator.loss_trace) {
    trace.push_back({{"landuse", rec.landuse}, {"ntl_prior", rec.ntl_prior}, {"prox_prior", rec.prox_prior},
                     {"total", rec.total}});
  }
  j["loss_trace"] = std::move(trace);
  const TrainConfig& c = allocator.config;
  j["config"] = {{"lambda_ntl", c.lambda_ntl},       {"lambda_prox", c.lambda_prox},
                 {"learning_rate", c.learning_rate}, {"max_epochs", c.max_epochs},
                 {"convergence_tol", c.convergence_tol}, {"seed", c.seed},
                 {"temperature", c.temperature},     {"init_scale", c.init_scale},
                 {"feature_fusion", c.feature_fusion}, {"prox_gamma", c.prox_gamma}};
  return j.dump(2);
}

TrainedAllocator trained_allocator_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("allocator file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kFormatVersion) throw ValidationError("unsupported allocator format version");
    TrainedAllocator out;
    out.params.init_seed = j.at("seed").get<std::uint64_t>();
    out.params.temperature = j.at("tau").get<double>();
    const auto weights = j.at("weights").get<std::vector<double>>();
    if (weights.size() != kParamCount) throw ValidationError("allocator file has the wrong number of weights");
    std::copy(weights.begin(), weights.end(), out.params.weights.begin());
    out.converged = j.value("converged", false);
    out.train_region_ids = j.value("train_region_ids", std::vector<Id>{});
    for (const auto& rec : j.value("loss_trace", nlohmann::json::array())) {
      out.loss_trace.push_back({rec.at("landuse").get<double>(), rec.at("ntl_prior").get<double>(),
                                rec.at("prox_prior").get<double>(), rec.at("total").get<double>()});
    }
    if (j.contains("config")) {
      const auto& c = j["config"];
      TrainConfig& t = out.config;
      t.lambda_ntl = c.value("lambda_ntl", t.lambda_ntl);
      t.lambda_prox = c.value("lambda_prox", t.lambda_prox);
      t.learning_rate = c.value("learning_rate", t.learning_rate);
      t.max_epochs = c.value("max_epochs", t.max_epochs);
      t.convergence_tol = c.value("convergence_tol", t.convergence_tol);
      t.seed = c.value("seed", t.seed);
      t.temperature = c.value("temperature", t.temperature);
      t.init_scale = c.value("init_scale", t.init_scale);
      t.feature_fusion = c.value("feature_fusion", t.feature_fusion);
      t.prox_gamma = c.value("prox_gamma", t.prox_gamma);
    }
    validate(out.params);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed allocator file: ") + e.what());
  }
}

}  // namespace loadalloc
