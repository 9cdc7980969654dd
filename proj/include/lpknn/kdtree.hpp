#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lpknn {

using NodeId = std::uint32_t;

// Non-owning view of n points of dimension dim, row-major.
struct PointSet {
  std::span<const double> data;
  std::size_t dim = 0;

  [[nodiscard]] std::size_t size() const { return dim ? data.size() / dim : 0; }
  [[nodiscard]] std::span<const double> point(std::size_t i) const {
    return data.subspan(i * dim, dim);
  }
};

struct Neighbor {
  double dist2 = 0.0;
  NodeId id = 0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.id < b.id);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Squared Euclidean distance accumulated in dimension order.
double squared_distance(std::span<const double> a, std::span<const double> b);

// Exact k-nearest-neighbor index. The split dimension cycles with depth and
// the split value is the median coordinate; points on the split plane go to
// the right child. The tree keeps a view of the points, which must outlive it.
class KdTree {
 public:
  explicit KdTree(PointSet points, std::size_t leaf_size = 12);

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] std::size_t dim() const { return points_.dim; }

  // k nearest points ordered by (distance, id). `exclude` (typically the
  // query's own id) is never returned. Throws ParamError when fewer than k
  // candidates exist.
  [[nodiscard]] std::vector<Neighbor> query(std::span<const double> q,
                                            std::size_t k,
                                            std::optional<NodeId> exclude = {}) const;

  [[nodiscard]] std::vector<NodeId> query_ids(std::span<const double> q,
                                              std::size_t k,
                                              std::optional<NodeId> exclude = {}) const;

  // Writes exactly k ids (ascending by distance) into out; hot path for
  // graph construction.
  void query_into(std::span<const double> q, std::size_t k,
                  std::optional<NodeId> exclude, std::span<NodeId> out) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t split_dim = 0;
    double split = 0.0;
    [[nodiscard]] bool leaf() const { return left < 0; }
  };

  class Search;

  std::int32_t build(std::uint32_t begin, std::uint32_t end, std::size_t depth);
  [[nodiscard]] double coord(NodeId id, std::size_t d) const {
    return points_.data[id * points_.dim + d];
  }

  PointSet points_;
  std::size_t leaf_size_;
  std::vector<NodeId> order_;
  std::vector<Node> nodes_;
};

}  // namespace lpknn
