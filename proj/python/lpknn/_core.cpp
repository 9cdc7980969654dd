#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "lpknn/error.hpp"
#include "lpknn/features.hpp"
#include "lpknn/knn_graph.hpp"
#include "lpknn/pipeline.hpp"
#include "lpknn/propagation.hpp"

namespace py = pybind11;
using namespace lpknn;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I32Array = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

RgbImage image_from(const U8Array& rgb) {
  if (rgb.ndim() != 3 || rgb.shape(2) != 3) {
    throw DimensionError("image must have shape (height, width, 3)");
  }
  const auto h = static_cast<int>(rgb.shape(0));
  const auto w = static_cast<int>(rgb.shape(1));
  return RgbImage::from_rgb8(w, h, {rgb.data(), static_cast<std::size_t>(rgb.size())});
}

GrayImage gray_from(const U8Array& a, const char* what) {
  if (a.ndim() != 2) throw DimensionError(std::string(what) + " must have shape (height, width)");
  GrayImage g(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(g.pixels.data(), a.data(), g.pixels.size());
  return g;
}

FeatureWeights weights_or_unit(const std::optional<std::vector<double>>& lambda) {
  return lambda ? weights_from(*lambda) : unit_weights();
}

F64Array features_py(const U8Array& rgb, const std::optional<std::vector<double>>& lambda) {
  const FeatureMatrix f = extract_features(image_from(rgb), weights_or_unit(lambda));
  F64Array out({static_cast<py::ssize_t>(f.rows()), static_cast<py::ssize_t>(kFeatureCount)});
  std::memcpy(out.mutable_data(), f.values().data(), f.values().size_bytes());
  return out;
}

py::tuple knn_graph_py(const F64Array& points, int k, int workers) {
  if (points.ndim() != 2) throw DimensionError("points must have shape (n, d)");
  const PointSet ps{{points.data(), static_cast<std::size_t>(points.size())},
                    static_cast<std::size_t>(points.shape(1))};
  PixelGraph g;
  {
    py::gil_scoped_release release;
    g = build_knn_graph(ps, k, workers);
  }
  py::array_t<std::int64_t> offsets(static_cast<py::ssize_t>(g.offsets.size()));
  std::copy(g.offsets.begin(), g.offsets.end(), offsets.mutable_data());
  py::array_t<std::int64_t> neighbors(static_cast<py::ssize_t>(g.neighbors.size()));
  std::copy(g.neighbors.begin(), g.neighbors.end(), neighbors.mutable_data());
  return py::make_tuple(offsets, neighbors);
}

PixelGraph graph_from_csr(const py::array_t<std::int64_t>& offsets,
                          const py::array_t<std::int64_t>& neighbors) {
  if (offsets.size() < 1) throw ParamError("offsets must hold node_count + 1 entries");
  const std::size_t n = static_cast<std::size_t>(offsets.size()) - 1;
  std::vector<Edge> edges;
  const auto* off = offsets.data();
  const auto* nb = neighbors.data();
  if (off[n] != neighbors.size()) throw ParamError("offsets do not match neighbors");
  for (std::size_t i = 0; i < n; ++i) {
    for (auto e = off[i]; e < off[i + 1]; ++e) {
      if (nb[e] < 0 || static_cast<std::size_t>(nb[e]) >= n) {
        throw ParamError("neighbor id out of range");
      }
      edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(nb[e]));
    }
  }
  return graph_from_edges(n, edges);
}

py::dict propagate_py(const py::array_t<std::int64_t>& offsets,
                      const py::array_t<std::int64_t>& neighbors, const I32Array& seeds,
                      int classes, int max_iterations, int workers) {
  const PixelGraph g = graph_from_csr(offsets, neighbors);
  const std::span<const int> s(seeds.data(), static_cast<std::size_t>(seeds.size()));
  ConvergenceMonitor monitor;
  monitor.max_iterations = max_iterations;
  PropagationOptions opts;
  opts.workers = workers;
  PropagationResult r;
  {
    py::gil_scoped_release release;
    r = run_propagation(init_domination(s, classes), g, monitor, opts);
  }
  F64Array dom({static_cast<py::ssize_t>(r.domination.nodes()),
                static_cast<py::ssize_t>(classes)});
  std::memcpy(dom.mutable_data(), r.domination.values().data(),
              r.domination.values().size_bytes());
  const auto labels = decode_labels(r.domination);
  py::dict out;
  out["domination"] = dom;
  out["labels"] = py::array_t<std::int32_t>(static_cast<py::ssize_t>(labels.size()),
                                            labels.data());
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  std::vector<double> stats;
  for (const auto& cp : r.checkpoints) stats.push_back(cp.statistic);
  out["checkpoints"] = stats;
  return out;
}

py::dict segment_py(const U8Array& rgb, const U8Array& trimap, int k,
                    const std::optional<std::vector<double>>& lambda, int workers) {
  const RgbImage image = image_from(rgb);
  const SeedMap seeds = decode_trimap(gray_from(trimap, "trimap"));
  const SegParams params{k, weights_or_unit(lambda)};
  SegmentOptions opts;
  opts.workers = workers;
  SegmentationResult r;
  {
    py::gil_scoped_release release;
    r = segment(image, seeds, params, opts);
  }
  I32Array labels({static_cast<py::ssize_t>(r.height), static_cast<py::ssize_t>(r.width)});
  std::copy(r.labels.begin(), r.labels.end(), labels.mutable_data());
  const GrayImage mask = encode_mask(r);
  U8Array mask_arr({static_cast<py::ssize_t>(r.height), static_cast<py::ssize_t>(r.width)});
  std::memcpy(mask_arr.mutable_data(), mask.pixels.data(), mask.pixels.size());
  py::dict out;
  out["labels"] = labels;
  out["mask"] = mask_arr;
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  return out;
}

double error_rate_py(const I32Array& labels, const U8Array& truth, const U8Array& trimap) {
  const SeedMap seeds = decode_trimap(gray_from(trimap, "trimap"));
  const GroundTruth gt = decode_ground_truth(gray_from(truth, "truth"));
  if (labels.ndim() != 2) throw DimensionError("labels must have shape (height, width)");
  SegmentationResult r;
  r.height = static_cast<int>(labels.shape(0));
  r.width = static_cast<int>(labels.shape(1));
  r.labels.assign(labels.data(), labels.data() + labels.size());
  return error_rate(r, gt, seeds);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Label propagation on kNN graphs for interactive image segmentation";

  py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ParamError>(m, "ParamError", PyExc_ValueError);

  m.attr("FEATURE_NAMES") = std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end());

  m.def("rgb_to_hsv", [](double r, double g, double b) {
    const Hsv h = rgb_to_hsv({r, g, b});
    return py::make_tuple(h.h, h.s, h.v);
  }, py::arg("r"), py::arg("g"), py::arg("b"));

  m.def("extract_features", &features_py, py::arg("image"), py::arg("lambda_") = py::none(),
        "Per-pixel 23-feature matrix of an (h, w, 3) uint8 image, row-major pixels.");

  m.def("build_knn_graph", &knn_graph_py, py::arg("points"), py::arg("k"),
        py::arg("workers") = 1, "Symmetric kNN graph as CSR (offsets, neighbors).");

  m.def("propagate", &propagate_py, py::arg("offsets"), py::arg("neighbors"),
        py::arg("seeds"), py::arg("classes"), py::arg("max_iterations") = 10000,
        py::arg("workers") = 1,
        "Label propagation from 1-based seeds (0 = unlabeled) on a CSR graph.");

  m.def("segment", &segment_py, py::arg("image"), py::arg("trimap"), py::arg("k") = 10,
        py::arg("lambda_") = py::none(), py::arg("workers") = 1,
        "Segment an (h, w, 3) uint8 image with an (h, w) uint8 trimap.");

  m.def("error_rate", &error_rate_py, py::arg("labels"), py::arg("truth"), py::arg("trimap"));
}
