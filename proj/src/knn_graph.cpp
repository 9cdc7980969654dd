#include "lpknn/knn_graph.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>

#include "lpknn/error.hpp"

namespace lpknn {

namespace {

// Directed (source, target) lists -> sorted, deduplicated symmetric CSR.
PixelGraph symmetrize(std::size_t n, std::span<const Edge> directed) {
  std::vector<std::size_t> degree(n + 1, 0);
  for (const auto& [a, b] : directed) {
    ++degree[a];
    ++degree[b];
  }
  std::vector<std::size_t> start(n + 1, 0);
  std::partial_sum(degree.begin(), degree.end() - 1, start.begin() + 1);
  std::vector<NodeId> slots(start[n]);
  std::vector<std::size_t> fill(start.begin(), start.end() - 1);
  for (const auto& [a, b] : directed) {
    slots[fill[a]++] = b;
    slots[fill[b]++] = a;
  }

  PixelGraph g;
  g.offsets.assign(n + 1, 0);
  g.neighbors.reserve(slots.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto first = slots.begin() + static_cast<std::ptrdiff_t>(start[i]);
    auto last = slots.begin() + static_cast<std::ptrdiff_t>(start[i + 1]);
    std::sort(first, last);
    last = std::unique(first, last);
    g.neighbors.insert(g.neighbors.end(), first, last);
    g.offsets[i + 1] = g.neighbors.size();
  }
  g.neighbors.shrink_to_fit();
  g.node_to_pixel.resize(n);
  std::iota(g.node_to_pixel.begin(), g.node_to_pixel.end(), std::size_t{0});
  return g;
}

}  // namespace

PixelGraph graph_from_edges(std::size_t n, std::span<const Edge> edges) {
  for (const auto& [a, b] : edges) {
    if (a >= n || b >= n) throw ParamError("edge endpoint out of range");
    if (a == b) throw ParamError("self-loop on node " + std::to_string(a));
  }
  return symmetrize(n, edges);
}

PixelGraph build_knn_graph(PointSet points, int k, int workers) {
  const std::size_t n = points.size();
  if (points.dim == 0 || points.data.size() != n * points.dim) {
    throw DimensionError("knn graph: feature buffer does not match dimension");
  }
  if (n < 2) throw ParamError("knn graph: need at least 2 nodes, got " + std::to_string(n));
  if (k < 1 || static_cast<std::size_t>(k) >= n) {
    throw ParamError("knn graph: k must be in [1, " + std::to_string(n - 1) +
                     "], got " + std::to_string(k));
  }
  const KdTree tree(points);
  const auto kk = static_cast<std::size_t>(k);
  std::vector<NodeId> nearest(n * kk);

  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for num_threads(std::max(workers, 1)) schedule(dynamic, 512)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto id = static_cast<NodeId>(i);
    tree.query_into(points.point(id), kk, id,
                    std::span<NodeId>(nearest.data() + id * kk, kk));
  }

  std::vector<Edge> directed(n * kk);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kk; ++j) {
      directed[i * kk + j] = {static_cast<NodeId>(i), nearest[i * kk + j]};
    }
  }
  return symmetrize(n, directed);
}

PixelGraph build_knn_graph(const FeatureMatrix& features, int k, int workers) {
  return build_knn_graph(PointSet{features.values(), FeatureMatrix::cols()}, k,
                         workers);
}

std::vector<Edge> edge_list(const PixelGraph& graph) {
  std::vector<Edge> edges;
  edges.reserve(graph.edge_count());
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    for (NodeId j : graph.neighbors_of(i)) {
      if (i < j) edges.emplace_back(static_cast<NodeId>(i), j);
    }
  }
  return edges;
}

void write_edge_list(const PixelGraph& graph, std::ostream& out) {
  for (const auto& [i, j] : edge_list(graph)) out << i << ' ' << j << '\n';
}

}  // namespace lpknn
