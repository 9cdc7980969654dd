#include "lpknn/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "lpknn/error.hpp"

namespace lpknn {

void SegParams::validate() const {
  if (k < 1) throw ParamError("k must be >= 1, got " + std::to_string(k));
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    if (!std::isfinite(lambda[c]) || lambda[c] < 0.0) {
      throw ParamError("lambda[" + std::to_string(c) + "] must be finite and >= 0");
    }
  }
}

FeatureWeights weights_from(std::span<const double> values) {
  if (values.size() != kFeatureCount) {
    throw ParamError("lambda needs " + std::to_string(kFeatureCount) +
                     " entries, got " + std::to_string(values.size()));
  }
  FeatureWeights w;
  std::copy(values.begin(), values.end(), w.begin());
  return w;
}

namespace {

std::vector<double> parse_reals(std::istream& in, const std::string& source) {
  std::vector<double> out;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) {
      throw ParamError(source + ": not a number: '" + token + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

FeatureWeights read_weights_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParamError("cannot open lambda file " + path.string());
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    auto reals = parse_reals(ls, path.string());
    if (reals.empty()) continue;
    if (reals.size() != 1) {
      throw ParamError(path.string() + ": expected one real per line");
    }
    values.push_back(reals.front());
  }
  return weights_from(values);
}

FeatureWeights parse_weights(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  return weights_from(parse_reals(in, "lambda"));
}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = at(i, c);
  return out;
}

Hsv rgb_to_hsv(const Rgb& rgb) {
  const double mx = std::max({rgb.r, rgb.g, rgb.b});
  const double mn = std::min({rgb.r, rgb.g, rgb.b});
  const double delta = mx - mn;
  Hsv out;
  out.v = mx;
  if (delta <= 0.0) return out;
  out.s = delta / mx;
  double h = 0.0;
  if (mx == rgb.r) {
    h = (rgb.g - rgb.b) / delta;
    if (h < 0.0) h += 6.0;
  } else if (mx == rgb.g) {
    h = (rgb.b - rgb.r) / delta + 2.0;
  } else {
    h = (rgb.r - rgb.g) / delta + 4.0;
  }
  h /= 6.0;
  if (h >= 1.0) h -= 1.0;
  out.h = h;
  return out;
}

Rgb hsv_to_rgb(const Hsv& hsv) {
  const double c = hsv.v * hsv.s;
  const double hp = hsv.h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  const double m = hsv.v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  return {r + m, g + m, b + m};
}

ExcessColor excess_components(const Rgb& rgb) {
  return {2.0 * rgb.r - rgb.g - rgb.b, 2.0 * rgb.g - rgb.r - rgb.b,
          2.0 * rgb.b - rgb.r - rgb.g};
}

WindowStats neighborhood_stats(std::span<const double> plane, int width,
                               int height, int row, int col) {
  const int r0 = std::max(row - 1, 0);
  const int r1 = std::min(row + 1, height - 1);
  const int c0 = std::max(col - 1, 0);
  const int c1 = std::min(col + 1, width - 1);
  double sum = 0.0;
  int n = 0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      sum += plane[static_cast<std::size_t>(r) * width + c];
      ++n;
    }
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double d = plane[static_cast<std::size_t>(r) * width + c] - mean;
      ss += d * d;
    }
  }
  return {mean, std::sqrt(ss / n)};
}

FeatureMatrix raw_features(const RgbImage& image) {
  const int w = image.width;
  const int h = image.height;
  const std::size_t n = image.size();
  if (w < 1 || h < 1 || n != static_cast<std::size_t>(w) * h) {
    throw DimensionError("invalid image dimensions");
  }

  // Planes: R G B H S V
  std::array<std::vector<double>, 6> planes;
  for (auto& p : planes) p.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Rgb& px = image.pixels[i];
    const Hsv hsv = rgb_to_hsv(px);
    planes[0][i] = px.r;
    planes[1][i] = px.g;
    planes[2][i] = px.b;
    planes[3][i] = hsv.h;
    planes[4][i] = hsv.s;
    planes[5][i] = hsv.v;
  }

  FeatureMatrix f(n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      auto row = f.row(i);
      row[0] = r;
      row[1] = c;
      for (int p = 0; p < 6; ++p) row[2 + p] = planes[p][i];
      const ExcessColor ex = excess_components(image.pixels[i]);
      row[8] = ex.exr;
      row[9] = ex.exg;
      row[10] = ex.exb;
      for (int p = 0; p < 3; ++p) {
        const WindowStats rgb = neighborhood_stats(planes[p], w, h, r, c);
        const WindowStats hsv = neighborhood_stats(planes[3 + p], w, h, r, c);
        row[11 + p] = rgb.mean;
        row[14 + p] = rgb.stddev;
        row[17 + p] = hsv.mean;
        row[20 + p] = hsv.stddev;
      }
    }
  }
  return f;
}

void normalize_columns(FeatureMatrix& features) {
  const std::size_t n = features.rows();
  if (n == 0) return;
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    double lo = features.at(0, c);
    double hi = lo;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = features.at(i, c);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    if (lo == hi) {
      for (std::size_t i = 0; i < n; ++i) features.at(i, c) = 0.0;
      continue;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = features.at(i, c) - mean;
      ss += d * d;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      features.at(i, c) = (features.at(i, c) - mean) / sigma;
    }
  }
}

void scale_columns(FeatureMatrix& features, std::span<const double> weights) {
  const FeatureWeights w = weights_from(weights);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    auto row = features.row(i);
    for (std::size_t c = 0; c < kFeatureCount; ++c) row[c] *= w[c];
  }
}

FeatureMatrix extract_features(const RgbImage& image,
                               std::span<const double> weights) {
  const FeatureWeights w = weights_from(weights);
  FeatureMatrix f = raw_features(image);
  normalize_columns(f);
  scale_columns(f, w);
  return f;
}

FeatureMatrix select_rows(const FeatureMatrix& features,
                          std::span<const std::size_t> rows) {
  FeatureMatrix out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace lpknn
