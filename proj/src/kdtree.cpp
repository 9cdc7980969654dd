#include "lpknn/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "lpknn/error.hpp"

namespace lpknn {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

KdTree::KdTree(PointSet points, std::size_t leaf_size)
    : points_(points), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points_.dim == 0) throw ParamError("kd-tree: dimension must be >= 1");
  if (points_.data.size() % points_.dim != 0) {
    throw DimensionError("kd-tree: point buffer is not a multiple of the dimension");
  }
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw ParamError("kd-tree: too many points");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), NodeId{0});
  if (!order_.empty()) {
    nodes_.reserve(2 * (order_.size() / leaf_size_ + 1));
    build(0, static_cast<std::uint32_t>(order_.size()), 0);
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end,
                           std::size_t depth) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return index;

  const std::size_t dim = points_.dim;
  for (std::size_t attempt = 0; attempt < dim; ++attempt) {
    const std::size_t d = (depth + attempt) % dim;
    auto first = order_.begin() + begin;
    auto last = order_.begin() + end;
    auto mid = first + (end - begin) / 2;
    std::nth_element(first, mid, last, [&](NodeId a, NodeId b) {
      const double ca = coord(a, d);
      const double cb = coord(b, d);
      return ca < cb || (ca == cb && a < b);
    });
    double split = coord(*mid, d);
    auto cut = std::partition(first, last,
                              [&](NodeId id) { return coord(id, d) < split; });
    if (cut == first) {
      // The median is the minimum; split just above it instead.
      double next = std::numeric_limits<double>::infinity();
      for (auto it = first; it != last; ++it) {
        const double c = coord(*it, d);
        if (c > split) next = std::min(next, c);
      }
      if (next == std::numeric_limits<double>::infinity()) continue;
      split = next;
      cut = std::partition(first, last,
                           [&](NodeId id) { return coord(id, d) < split; });
    }
    const auto cut_at = static_cast<std::uint32_t>(cut - order_.begin());
    nodes_[index].split_dim = static_cast<std::uint32_t>(d);
    nodes_[index].split = split;
    const std::int32_t left = build(begin, cut_at, depth + 1);
    const std::int32_t right = build(cut_at, end, depth + 1);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
  }
  // Every coordinate identical: keep as one leaf.
  return index;
}

class KdTree::Search {
 public:
  Search(const KdTree& tree, std::span<const double> q, std::size_t k,
         std::optional<NodeId> exclude)
      : tree_(tree), q_(q), k_(k), exclude_(exclude), offsets_(q.size(), 0.0) {
    heap_.reserve(k + 1);
  }

  void run() {
    if (!tree_.nodes_.empty()) visit(0, 0.0);
    std::sort_heap(heap_.begin(), heap_.end());
  }

  std::vector<Neighbor>& result() { return heap_; }

 private:
  void consider(double d2, NodeId id) {
    const Neighbor cand{d2, id};
    if (heap_.size() < k_) {
      heap_.push_back(cand);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (cand < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = cand;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  [[nodiscard]] bool worth_visiting(double bound) const {
    if (heap_.size() < k_) return true;
    // The incremental bound carries rounding; prune only with margin so that
    // equal-distance candidates with lower ids are never skipped.
    return bound * (1.0 - 1e-12) <= heap_.front().dist2;
  }

  void visit(std::int32_t node_index, double bound) {
    const Node& node = tree_.nodes_[node_index];
    if (node.leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const NodeId id = tree_.order_[i];
        if (exclude_ && *exclude_ == id) continue;
        consider(squared_distance(q_, tree_.points_.point(id)), id);
      }
      return;
    }
    const std::size_t d = node.split_dim;
    const double diff = q_[d] - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    visit(near, bound);
    const double old = offsets_[d];
    const double cut = diff * diff;
    const double far_bound = bound - old + cut;
    if (worth_visiting(far_bound)) {
      offsets_[d] = cut;
      visit(far, far_bound);
      offsets_[d] = old;
    }
  }

  const KdTree& tree_;
  std::span<const double> q_;
  std::size_t k_;
  std::optional<NodeId> exclude_;
  std::vector<double> offsets_;
  std::vector<Neighbor> heap_;
};

std::vector<Neighbor> KdTree::query(std::span<const double> q, std::size_t k,
                                    std::optional<NodeId> exclude) const {
  if (q.size() != points_.dim) {
    throw DimensionError("kd-tree query: expected dimension " +
                         std::to_string(points_.dim) + ", got " +
                         std::to_string(q.size()));
  }
  const std::size_t available =
      points_.size() - ((exclude && *exclude < points_.size()) ? 1 : 0);
  if (k > available) {
    throw ParamError("kd-tree query: k=" + std::to_string(k) + " exceeds the " +
                     std::to_string(available) + " available points");
  }
  Search search(*this, q, k, exclude);
  search.run();
  return std::move(search.result());
}

std::vector<NodeId> KdTree::query_ids(std::span<const double> q, std::size_t k,
                                      std::optional<NodeId> exclude) const {
  std::vector<NodeId> ids(k);
  query_into(q, k, exclude, ids);
  return ids;
}

void KdTree::query_into(std::span<const double> q, std::size_t k,
                        std::optional<NodeId> exclude, std::span<NodeId> out) const {
  const auto found = query(q, k, exclude);
  for (std::size_t i = 0; i < found.size(); ++i) out[i] = found[i].id;
}

}  // namespace lpknn
