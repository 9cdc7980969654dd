#include "lpknn/pipeline.hpp"

#include <algorithm>
#include <sstream>
#include <string>

#include "lpknn/error.hpp"

namespace lpknn {

std::size_t SeedMap::count(int role) const {
  return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), role));
}

SeedMap decode_trimap(const GrayImage& trimap) {
  if (trimap.width < 1 || trimap.height < 1) throw DimensionError("empty trimap");
  SeedMap seeds;
  seeds.width = trimap.width;
  seeds.height = trimap.height;
  seeds.class_count = 2;
  seeds.background_class = kBackground;
  seeds.roles.resize(trimap.size());
  for (int r = 0; r < trimap.height; ++r) {
    for (int c = 0; c < trimap.width; ++c) {
      const std::uint8_t v = trimap.at(r, c);
      int role = 0;
      switch (v) {
        case 0: role = kIgnored; break;
        case 64: role = kBackground; break;
        case 128: role = kUnlabeled; break;
        case 255: role = kForeground; break;
        default: {
          std::ostringstream msg;
          msg << "trimap value " << int{v} << " at row " << r << ", col " << c
              << " is not one of 0, 64, 128, 255";
          throw DecodeError(msg.str());
        }
      }
      seeds.roles[static_cast<std::size_t>(r) * trimap.width + c] = role;
    }
  }
  return seeds;
}

ScribbleSeeds decode_scribbles(int width, int height, const std::vector<Stroke>& strokes,
                               int class_count) {
  if (width < 1 || height < 1) throw DimensionError("empty image");
  int max_class = 2;
  for (const Stroke& s : strokes) {
    if (s.class_id < 1) {
      throw ParamError("stroke class " + std::to_string(s.class_id) + " must be >= 1");
    }
    max_class = std::max(max_class, s.class_id);
  }
  if (class_count == 0) class_count = max_class;
  if (class_count < 2) throw ParamError("need at least 2 classes");

  ScribbleSeeds out;
  out.seeds.width = width;
  out.seeds.height = height;
  out.seeds.class_count = class_count;
  out.seeds.background_class = class_count;
  out.seeds.roles.assign(static_cast<std::size_t>(width) * height, kUnlabeled);
  for (const Stroke& s : strokes) {
    if (s.class_id > class_count) {
      throw ParamError("stroke class " + std::to_string(s.class_id) + " outside 1.." +
                       std::to_string(class_count));
    }
    for (const PixelCoord& p : s.pixels) {
      if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
        throw ParamError("stroke pixel (" + std::to_string(p.x) + ", " +
                         std::to_string(p.y) + ") outside " + std::to_string(width) +
                         "x" + std::to_string(height));
      }
      int& role = out.seeds.roles[static_cast<std::size_t>(p.y) * width + p.x];
      if (role != kUnlabeled && role != s.class_id) {
        out.conflicts.push_back({p, role, s.class_id});
      }
      role = s.class_id;
    }
  }
  return out;
}

std::vector<Stroke> rasterize_strokes(int width, int height,
                                      const std::vector<BrushStroke>& strokes) {
  std::vector<Stroke> out;
  out.reserve(strokes.size());
  for (const BrushStroke& bs : strokes) {
    if (bs.brush_radius < 0) throw ParamError("brush_radius must be >= 0");
    Stroke s;
    s.class_id = bs.class_id;
    const int r = bs.brush_radius;
    for (const PixelCoord& p : bs.points) {
      if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
        throw ParamError("stroke point (" + std::to_string(p.x) + ", " +
                         std::to_string(p.y) + ") outside " + std::to_string(width) +
                         "x" + std::to_string(height));
      }
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int x = p.x + dx;
          const int y = p.y + dy;
          if (x < 0 || y < 0 || x >= width || y >= height) continue;
          s.pixels.push_back({x, y});
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

GroundTruth decode_ground_truth(const GrayImage& mask) {
  GroundTruth gt;
  gt.width = mask.width;
  gt.height = mask.height;
  gt.labels.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const std::uint8_t v = mask.pixels[i];
    gt.labels[i] = v >= 224  ? TruthLabel::kForeground
                   : v <= 31 ? TruthLabel::kBackground
                             : TruthLabel::kUncertain;
  }
  return gt;
}

std::vector<std::size_t> participating_pixels(const SeedMap& seeds) {
  std::vector<std::size_t> out;
  out.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (seeds.roles[i] != kIgnored) out.push_back(i);
  }
  return out;
}

namespace {

void check_seeds(const SeedMap& seeds) {
  if (seeds.width < 1 || seeds.height < 1 ||
      seeds.roles.size() != static_cast<std::size_t>(seeds.width) * seeds.height) {
    throw DimensionError("seed map does not match its dimensions");
  }
  if (seeds.class_count < 2) throw ParamError("need at least 2 classes");
  if (seeds.background_class < 1 || seeds.background_class > seeds.class_count) {
    throw ParamError("background class outside 1..class_count");
  }
}

// Result for a seed map without unlabeled pixels: seeds copied through.
SegmentationResult seeds_only(const SeedMap& seeds) {
  SegmentationResult out;
  out.width = seeds.width;
  out.height = seeds.height;
  out.class_count = seeds.class_count;
  out.labels.resize(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    out.labels[i] = seeds.roles[i] == kIgnored ? seeds.background_class : seeds.roles[i];
  }
  out.node_count = seeds.size() - seeds.count(kIgnored);
  std::vector<int> node_seeds;
  for (int r : seeds.roles) {
    if (r != kIgnored) node_seeds.push_back(r);
  }
  out.unseeded_classes = unseeded_classes(node_seeds, seeds.class_count);
  return out;
}

}  // namespace

FeatureMatrix node_features(const RgbImage& image, const SeedMap& seeds) {
  check_seeds(seeds);
  if (image.width != seeds.width || image.height != seeds.height) {
    throw DimensionError("image is " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + " but seeds are " +
                         std::to_string(seeds.width) + "x" + std::to_string(seeds.height));
  }
  FeatureMatrix nodes = select_rows(raw_features(image), participating_pixels(seeds));
  normalize_columns(nodes);
  return nodes;
}

PixelGraph build_pixel_graph(const FeatureMatrix& node_features, const SeedMap& seeds,
                             int k, int workers) {
  check_seeds(seeds);
  const auto pixels = participating_pixels(seeds);
  if (node_features.rows() != pixels.size()) {
    throw DimensionError("feature matrix has " + std::to_string(node_features.rows()) +
                         " rows but the seed map has " + std::to_string(pixels.size()) +
                         " non-ignored pixels");
  }
  if (k >= 1 && static_cast<std::size_t>(k) >= pixels.size()) {
    throw ParamError("k=" + std::to_string(k) + " must be below the node count " +
                     std::to_string(pixels.size()));
  }
  PixelGraph graph = build_knn_graph(node_features, k, workers);
  graph.node_to_pixel = pixels;
  return graph;
}

SegmentationResult segment_on_graph(const PixelGraph& graph, const SeedMap& seeds,
                                    const SegmentOptions& options) {
  check_seeds(seeds);
  if (seeds.unlabeled_count() == 0) return seeds_only(seeds);

  const auto pixels = participating_pixels(seeds);
  if (graph.node_to_pixel != pixels) {
    throw DimensionError("graph node set does not match the seed map's non-ignored pixels");
  }
  std::vector<int> node_seeds(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) node_seeds[i] = seeds.roles[pixels[i]];

  SegmentationResult out = seeds_only(seeds);
  PropagationOptions prop;
  prop.workers = options.workers;
  prop.on_checkpoint = options.on_checkpoint;
  PropagationResult run = run_propagation(init_domination(node_seeds, seeds.class_count),
                                          graph, options.monitor, prop);
  const auto labels = decode_labels(run.domination);
  for (std::size_t i = 0; i < pixels.size(); ++i) out.labels[pixels[i]] = labels[i];
  out.iterations = run.iterations;
  out.converged = run.converged;
  out.checkpoints = std::move(run.checkpoints);
  for (std::size_t node : run.isolated_nodes) out.isolated_pixels.push_back(pixels[node]);
  return out;
}

SegmentationResult segment_features(const FeatureMatrix& node_features,
                                    const SeedMap& seeds, int k,
                                    const SegmentOptions& options) {
  check_seeds(seeds);
  if (seeds.unlabeled_count() == 0) return seeds_only(seeds);
  const PixelGraph graph = build_pixel_graph(node_features, seeds, k, options.workers);
  return segment_on_graph(graph, seeds, options);
}

SegmentationResult segment(const RgbImage& image, const SeedMap& seeds,
                           const SegParams& params, const SegmentOptions& options) {
  params.validate();
  check_seeds(seeds);
  if (image.width != seeds.width || image.height != seeds.height) {
    throw DimensionError("image is " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + " but seeds are " +
                         std::to_string(seeds.width) + "x" + std::to_string(seeds.height));
  }
  if (seeds.unlabeled_count() == 0) return seeds_only(seeds);
  FeatureMatrix features = node_features(image, seeds);
  scale_columns(features, params.lambda);
  return segment_features(features, seeds, params.k, options);
}

double error_rate(const SegmentationResult& result, const GroundTruth& truth,
                  const SeedMap& seeds) {
  if (result.labels.size() != seeds.size() || truth.labels.size() != seeds.size() ||
      truth.width != seeds.width || truth.height != seeds.height) {
    throw DimensionError("result, ground truth and seeds must share dimensions");
  }
  std::size_t evaluated = 0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (seeds.roles[i] != kUnlabeled) continue;
    const TruthLabel t = truth.labels[i];
    if (t == TruthLabel::kUncertain) continue;
    ++evaluated;
    if (result.labels[i] != static_cast<int>(t)) ++wrong;
  }
  if (evaluated == 0) {
    throw Error("error rate undefined: no unlabeled pixel with a certain ground truth");
  }
  return static_cast<double>(wrong) / static_cast<double>(evaluated);
}

std::uint8_t mask_level(int class_id, int class_count) {
  if (class_count == 2) return class_id == 1 ? 255 : 0;
  return static_cast<std::uint8_t>((255 * (class_id - 1)) / (class_count - 1));
}

GrayImage encode_mask(const SegmentationResult& result) {
  GrayImage mask(result.width, result.height);
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    mask.pixels[i] = mask_level(result.labels[i], result.class_count);
  }
  return mask;
}

std::string mask_legend(int class_count) {
  std::ostringstream out;
  for (int c = 1; c <= class_count; ++c) {
    out << int{mask_level(c, class_count)} << ' ' << c << '\n';
  }
  return out.str();
}

}  // namespace lpknn
