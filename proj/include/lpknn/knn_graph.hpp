#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "lpknn/features.hpp"
#include "lpknn/kdtree.hpp"

namespace lpknn {

// Undirected, unweighted adjacency in compressed sparse row form. Neighbor
// lists are sorted ascending, free of self-loops and duplicates, and
// symmetric.
struct PixelGraph {
  std::vector<std::size_t> offsets{0};  // node_count() + 1 entries
  std::vector<NodeId> neighbors;
  std::vector<std::size_t> node_to_pixel;  // node index -> image pixel index

  [[nodiscard]] std::size_t node_count() const { return offsets.size() - 1; }
  [[nodiscard]] std::size_t edge_count() const { return neighbors.size() / 2; }
  [[nodiscard]] std::size_t degree(std::size_t i) const {
    return offsets[i + 1] - offsets[i];
  }
  [[nodiscard]] std::span<const NodeId> neighbors_of(std::size_t i) const {
    return {neighbors.data() + offsets[i], degree(i)};
  }
};

using Edge = std::pair<NodeId, NodeId>;

// Symmetric closure of an arbitrary edge list over n nodes. Duplicates are
// merged; self-loops and out-of-range ids are rejected. node_to_pixel is the
// identity.
PixelGraph graph_from_edges(std::size_t n, std::span<const Edge> edges);

// Connect every point to its k nearest others (ties to the lower id) and take
// the symmetric closure. Requires n >= 2 and 1 <= k <= n-1. Queries run on
// `workers` threads; the result does not depend on the worker count.
PixelGraph build_knn_graph(PointSet points, int k, int workers = 1);
PixelGraph build_knn_graph(const FeatureMatrix& features, int k, int workers = 1);

// Edges as (i, j) pairs with i < j, ascending.
std::vector<Edge> edge_list(const PixelGraph& graph);

// One "i j" line per edge, i < j.
void write_edge_list(const PixelGraph& graph, std::ostream& out);

}  // namespace lpknn
