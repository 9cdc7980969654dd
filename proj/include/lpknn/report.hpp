#pragma once

#include <filesystem>
#include <optional>

#include "json.hpp"
#include "lpknn/features.hpp"
#include "lpknn/pipeline.hpp"

namespace lpknn {

// {error_rate, iterations, converged, k, lambda[23], wall_ms, ...}. error_rate
// is null without ground truth. oracle_tuned marks parameters that were fitted
// against the same ground truth the error is measured on.
nlohmann::json run_report(const SegmentationResult& result, const SegParams& params,
                          std::optional<double> error, double wall_ms,
                          bool oracle_tuned = false);

// {"k": int, "lambda": [23 reals]}; extra keys (e.g. "fitness") are ignored.
SegParams params_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const SegParams& params);
SegParams read_params_file(const std::filesystem::path& path);

}  // namespace lpknn
