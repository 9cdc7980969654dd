#include "lpknn/report.hpp"

#include <fstream>

#include "lpknn/error.hpp"

namespace lpknn {

nlohmann::json run_report(const SegmentationResult& result, const SegParams& params,
                          std::optional<double> error, double wall_ms,
                          bool oracle_tuned) {
  nlohmann::json j;
  j["error_rate"] = error ? nlohmann::json(*error) : nlohmann::json(nullptr);
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["k"] = params.k;
  j["lambda"] = params.lambda;
  j["wall_ms"] = wall_ms;
  j["oracle_tuned"] = oracle_tuned;
  j["nodes"] = result.node_count;
  j["classes"] = result.class_count;
  j["isolated_pixels"] = result.isolated_pixels.size();
  j["unseeded_classes"] = result.unseeded_classes;
  return j;
}

SegParams params_from_json(const nlohmann::json& j) {
  SegParams p;
  try {
    if (!j.is_object()) throw ParamError("params must be a JSON object");
    if (j.contains("k")) p.k = j.at("k").get<int>();
    if (j.contains("lambda")) {
      p.lambda = weights_from(j.at("lambda").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParamError(std::string("params: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json params_to_json(const SegParams& params) {
  return {{"k", params.k}, {"lambda", params.lambda}};
}

SegParams read_params_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParamError("cannot open params file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParamError(path.string() + ": " + e.what());
  }
  return params_from_json(j);
}

}  // namespace lpknn
