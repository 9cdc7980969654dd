#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lpknn/features.hpp"
#include "lpknn/image.hpp"
#include "lpknn/pipeline.hpp"
#include "oracles.hpp"

namespace lpknn::testing {

// Two-tone scene: reddish left half (foreground) next to a bluish right half.
// Pixels on either side of the seam see a 2:1 color mix in their window, so
// the two seam columns form their own clusters in feature space; each gets
// one seed.
struct TwoTone {
  RgbImage image;
  GrayImage trimap;  // 255 fg seeds, 64 bg seeds, 128 elsewhere
  GrayImage truth;   // 255 fg, 0 bg
};

inline TwoTone two_tone(int size = 64) {
  TwoTone t;
  t.image = RgbImage(size, size);
  t.trimap = GrayImage(size, size, 128);
  t.truth = GrayImage(size, size, 0);
  const int m = size / 2;
  const int q = size / 4;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const bool fg = c < m;
      t.image.at(r, c) = fg ? Rgb{200 / 255.0, 40 / 255.0, 30 / 255.0}
                            : Rgb{30 / 255.0, 60 / 255.0, 190 / 255.0};
      t.truth.at(r, c) = fg ? 255 : 0;
    }
  }
  // Five seeds per class: four in the body, one on the seam column.
  const std::array<std::array<int, 2>, 5> fg_seeds = {
      {{q, q}, {3 * q, q}, {m, q}, {m, 1}, {m, m - 1}}};
  const std::array<std::array<int, 2>, 5> bg_seeds = {
      {{q, 3 * q}, {3 * q, 3 * q}, {m, 3 * q}, {m, size - 2}, {m, m}}};
  for (const auto& [r, c] : fg_seeds) t.trimap.at(r, c) = 255;
  for (const auto& [r, c] : bg_seeds) t.trimap.at(r, c) = 64;
  return t;
}

struct RandomGraph {
  std::size_t n = 0;
  EdgeSet edges;
  std::vector<int> seeds;
  int classes = 2;
};

// Connected-ish random graph with every unlabeled node of degree >= 1 and at
// least one seed per class.
inline RandomGraph random_graph(std::mt19937& rng, std::size_t max_n = 30) {
  RandomGraph g;
  g.n = std::uniform_int_distribution<std::size_t>(6, max_n)(rng);
  g.classes = std::uniform_int_distribution<int>(2, 4)(rng);
  std::uniform_int_distribution<std::size_t> node(0, g.n - 1);
  // Spanning path in random order, then extra edges.
  std::vector<std::size_t> perm(g.n);
  for (std::size_t i = 0; i < g.n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 1; i < g.n; ++i) {
    g.edges.emplace(std::min(perm[i - 1], perm[i]), std::max(perm[i - 1], perm[i]));
  }
  const std::size_t extra = std::uniform_int_distribution<std::size_t>(0, 2 * g.n)(rng);
  for (std::size_t e = 0; e < extra; ++e) {
    const std::size_t a = node(rng);
    const std::size_t b = node(rng);
    if (a != b) g.edges.emplace(std::min(a, b), std::max(a, b));
  }
  g.seeds.assign(g.n, 0);
  for (int c = 1; c <= g.classes; ++c) g.seeds[perm[c - 1]] = c;
  std::bernoulli_distribution extra_seed(0.15);
  std::uniform_int_distribution<int> cls(1, g.classes);
  for (std::size_t i = static_cast<std::size_t>(g.classes); i < g.n; ++i) {
    if (extra_seed(rng)) g.seeds[perm[i]] = cls(rng);
  }
  return g;
}

inline std::vector<Edge> to_edges(const EdgeSet& s) {
  std::vector<Edge> out;
  for (const auto& [a, b] : s) out.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
  return out;
}

// Segmentation through exhaustive kNN and dense propagation, on features from
// the library extractor. Returns per-pixel labels (ignored -> background).
struct ReferenceSegmentation {
  std::vector<int> labels;
  int iterations = 0;
};

inline ReferenceSegmentation reference_segment(const RgbImage& image, const SeedMap& seeds,
                                               const SegParams& params) {
  std::vector<std::size_t> pixels;
  for (std::size_t i = 0; i < seeds.roles.size(); ++i) {
    if (seeds.roles[i] != kIgnored) pixels.push_back(i);
  }
  // Raw features from the library; standardization and weighting redone here
  // over the participating pixels.
  const FeatureMatrix raw = raw_features(image);
  std::vector<double> pts(pixels.size() * kFeatureCount);
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    double mean = 0.0;
    for (std::size_t p : pixels) mean += raw.at(p, c);
    mean /= static_cast<double>(pixels.size());
    double var = 0.0;
    double lo = raw.at(pixels[0], c), hi = lo;
    for (std::size_t p : pixels) {
      var += (raw.at(p, c) - mean) * (raw.at(p, c) - mean);
      lo = std::min(lo, raw.at(p, c));
      hi = std::max(hi, raw.at(p, c));
    }
    const double sd = std::sqrt(var / static_cast<double>(pixels.size()));
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const double z = lo == hi ? 0.0 : (raw.at(pixels[i], c) - mean) / sd;
      pts[i * kFeatureCount + c] = params.lambda[c] * z;
    }
  }
  std::vector<int> node_seeds;
  for (std::size_t p : pixels) node_seeds.push_back(seeds.roles[p]);
  ReferenceSegmentation out;
  out.labels.assign(seeds.roles.size(), seeds.background_class);
  const bool any_unlabeled =
      std::find(node_seeds.begin(), node_seeds.end(), 0) != node_seeds.end();
  std::vector<int> node_labels = node_seeds;
  if (any_unlabeled) {
    const EdgeSet edges = brute_knn_edges(pts, kFeatureCount, params.k);
    const DenseRun run =
        list_run(adjacency(pixels.size(), edges), node_seeds, seeds.class_count);
    node_labels = dense_argmax(run.v);
    out.iterations = run.iterations;
  }
  for (std::size_t i = 0; i < pixels.size(); ++i) out.labels[pixels[i]] = node_labels[i];
  return out;
}

}  // namespace lpknn::testing
