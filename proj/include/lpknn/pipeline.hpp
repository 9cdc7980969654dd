#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lpknn/features.hpp"
#include "lpknn/image.hpp"
#include "lpknn/knn_graph.hpp"
#include "lpknn/propagation.hpp"

namespace lpknn {

// Per-pixel seed role. Values >= 1 are labeled classes.
inline constexpr int kIgnored = -1;

// Trimap classes.
inline constexpr int kForeground = 1;
inline constexpr int kBackground = 2;

struct SeedMap {
  int width = 0;
  int height = 0;
  int class_count = 2;
  // Class that ignored pixels render as in the output mask.
  int background_class = kBackground;
  std::vector<int> roles;  // kIgnored, kUnlabeled or a class id, row-major

  [[nodiscard]] std::size_t size() const { return roles.size(); }
  [[nodiscard]] std::size_t count(int role) const;
  [[nodiscard]] std::size_t unlabeled_count() const { return count(kUnlabeled); }
};

// 0 -> ignored, 64 -> background seed, 128 -> unlabeled, 255 -> foreground
// seed. Any other value throws DecodeError naming the value and pixel.
SeedMap decode_trimap(const GrayImage& trimap);

struct PixelCoord {
  int x = 0;  // column
  int y = 0;  // row
};

struct Stroke {
  int class_id = 1;
  std::vector<PixelCoord> pixels;
};

struct StrokeConflict {
  PixelCoord pixel;
  int previous_class = 0;
  int new_class = 0;
};

struct ScribbleSeeds {
  SeedMap seeds;
  std::vector<StrokeConflict> conflicts;
};

// Stroked pixels become labeled, all others unlabeled; later strokes win and
// every overwrite of a different class is reported. class_count 0 means "the
// largest class id used" (at least 2).
ScribbleSeeds decode_scribbles(int width, int height, const std::vector<Stroke>& strokes,
                               int class_count = 0);

// A polyline of brush centers stamped as disks of the given radius.
struct BrushStroke {
  int class_id = 1;
  std::vector<PixelCoord> points;
  int brush_radius = 0;
};

// Disk stamping: every pixel within Euclidean distance brush_radius of a
// point. Centers must lie inside the image; disks are clipped at the border.
std::vector<Stroke> rasterize_strokes(int width, int height,
                                      const std::vector<BrushStroke>& strokes);

enum class TruthLabel : std::uint8_t { kUncertain = 0, kForeground = 1, kBackground = 2 };

struct GroundTruth {
  int width = 0;
  int height = 0;
  std::vector<TruthLabel> labels;
};

// >= 224 foreground, <= 31 background, anything between uncertain.
GroundTruth decode_ground_truth(const GrayImage& mask);

struct SegmentationResult {
  int width = 0;
  int height = 0;
  int class_count = 2;
  std::vector<int> labels;  // per pixel class id; ignored pixels = background
  int iterations = 0;
  bool converged = true;
  std::size_t node_count = 0;
  std::vector<Checkpoint> checkpoints;
  std::vector<std::size_t> isolated_pixels;
  std::vector<int> unseeded_classes;
};

struct SegmentOptions {
  int workers = 1;
  ConvergenceMonitor monitor;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

// Row-major indices of non-ignored pixels; node i of the graph is pixel
// participating_pixels(seeds)[i].
std::vector<std::size_t> participating_pixels(const SeedMap& seeds);

// Unweighted features of the non-ignored pixels, one row per node, with the
// columns standardized over those pixels only. Neighborhood windows still
// read the whole image.
FeatureMatrix node_features(const RgbImage& image, const SeedMap& seeds);

// kNN graph over weighted node features (rows as from node_features).
PixelGraph build_pixel_graph(const FeatureMatrix& node_features, const SeedMap& seeds,
                             int k, int workers = 1);

// Propagation and decode on a prepared graph whose node set matches the seeds.
SegmentationResult segment_on_graph(const PixelGraph& graph, const SeedMap& seeds,
                                    const SegmentOptions& options = {});

// Graph + propagation on weighted node features.
SegmentationResult segment_features(const FeatureMatrix& node_features,
                                    const SeedMap& seeds, int k,
                                    const SegmentOptions& options = {});

// Full pipeline: features, graph, propagation, decode. Deterministic.
SegmentationResult segment(const RgbImage& image, const SeedMap& seeds,
                           const SegParams& params, const SegmentOptions& options = {});

// Misclassified / evaluated over unlabeled pixels, excluding pixels the
// ground truth marks uncertain. Throws when nothing is evaluated.
double error_rate(const SegmentationResult& result, const GroundTruth& truth,
                  const SeedMap& seeds);

// Two classes: class 1 -> 255, class 2 -> 0. More classes: class c ->
// floor(255 (c-1) / (C-1)).
GrayImage encode_mask(const SegmentationResult& result);
std::uint8_t mask_level(int class_id, int class_count);
// "level class" lines for the sidecar legend.
std::string mask_legend(int class_count);

}  // namespace lpknn
