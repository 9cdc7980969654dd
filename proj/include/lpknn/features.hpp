#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "lpknn/image.hpp"

namespace lpknn {

inline constexpr std::size_t kFeatureCount = 23;

// Column order of every FeatureMatrix.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "row", "col", "R",   "G",   "B",   "H",   "S",   "V",
    "ExR", "ExG", "ExB", "MR",  "MG",  "MB",  "SDR", "SDG",
    "SDB", "MH",  "MS",  "MV",  "SDH", "SDS", "SDV"};

using FeatureWeights = std::array<double, kFeatureCount>;

inline FeatureWeights unit_weights() {
  FeatureWeights w;
  w.fill(1.0);
  return w;
}

// Graph hyperparameters: neighbor count and per-feature weights.
struct SegParams {
  int k = 10;
  FeatureWeights lambda = unit_weights();

  // Throws ParamError unless k >= 1 and every weight is finite and >= 0.
  void validate() const;
};

FeatureWeights weights_from(std::span<const double> values);
// 23 lines, one real per line; blank lines are skipped.
FeatureWeights read_weights_file(const std::filesystem::path& path);
// Comma or whitespace separated list of 23 reals.
FeatureWeights parse_weights(std::string_view text);

// n_rows x 23 reals, row-major.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t rows)
      : rows_(rows), values_(rows * kFeatureCount, 0.0) {}

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] static constexpr std::size_t cols() { return kFeatureCount; }

  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * kFeatureCount, kFeatureCount};
  }
  std::span<double> row(std::size_t i) {
    return {values_.data() + i * kFeatureCount, kFeatureCount};
  }
  [[nodiscard]] double at(std::size_t i, std::size_t c) const {
    return values_[i * kFeatureCount + c];
  }
  double& at(std::size_t i, std::size_t c) { return values_[i * kFeatureCount + c]; }

  [[nodiscard]] std::span<const double> values() const { return values_; }

  [[nodiscard]] std::vector<double> column(std::size_t c) const;

 private:
  std::size_t rows_ = 0;
  std::vector<double> values_;
};

struct Hsv {
  double h = 0.0;  // hue angle / 360, in [0,1)
  double s = 0.0;
  double v = 0.0;
};

// Hexcone model. Achromatic inputs give h = 0 and s = 0.
Hsv rgb_to_hsv(const Rgb& rgb);
Rgb hsv_to_rgb(const Hsv& hsv);

struct ExcessColor {
  double exr = 0.0;
  double exg = 0.0;
  double exb = 0.0;
};

// ExR = 2R-G-B, ExG = 2G-R-B, ExB = 2B-R-G.
ExcessColor excess_components(const Rgb& rgb);

struct WindowStats {
  double mean = 0.0;
  double stddev = 0.0;
};

// Mean and population standard deviation over the pixel and its existing
// 8-connected neighbors (4, 6 or 9 samples, no wraparound).
WindowStats neighborhood_stats(std::span<const double> plane, int width,
                               int height, int row, int col);

// The 23 raw feature columns before normalization.
FeatureMatrix raw_features(const RgbImage& image);

// Z-score each column over all rows (population sigma). Constant columns
// become zero.
void normalize_columns(FeatureMatrix& features);

// Multiply column c by weights[c].
void scale_columns(FeatureMatrix& features, std::span<const double> weights);

// raw_features -> normalize_columns -> scale_columns.
FeatureMatrix extract_features(const RgbImage& image,
                               std::span<const double> weights);

// Copy of the listed rows, in the given order.
FeatureMatrix select_rows(const FeatureMatrix& features,
                          std::span<const std::size_t> rows);

}  // namespace lpknn
