#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lpknn/knn_graph.hpp"

namespace lpknn {

// Class ids are 1-based; 0 marks an unlabeled node.
inline constexpr int kUnlabeled = 0;

// Per-node class domination levels. Rows of labeled nodes are one-hot for
// their seed class; unlabeled rows start uniform. Every row sums to 1.
class DominationMatrix {
 public:
  DominationMatrix() = default;

  // seeds[i] is the seed class of node i (1..classes) or kUnlabeled.
  // Throws ParamError for classes < 2 or a seed outside 1..classes.
  DominationMatrix(std::span<const int> seeds, int classes);

  [[nodiscard]] std::size_t nodes() const { return seeds_.size(); }
  [[nodiscard]] int classes() const { return classes_; }

  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * classes_, static_cast<std::size_t>(classes_)};
  }
  std::span<double> row(std::size_t i) {
    return {values_.data() + i * classes_, static_cast<std::size_t>(classes_)};
  }

  [[nodiscard]] int seed(std::size_t i) const { return seeds_[i]; }
  [[nodiscard]] bool labeled(std::size_t i) const { return seeds_[i] != kUnlabeled; }
  [[nodiscard]] std::span<const int> seeds() const { return seeds_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }

  friend bool operator==(const DominationMatrix&, const DominationMatrix&) = default;

 private:
  int classes_ = 0;
  std::vector<int> seeds_;
  std::vector<double> values_;
};

DominationMatrix init_domination(std::span<const int> seeds, int classes);

// Classes in 1..classes that have no seeded node.
std::vector<int> unseeded_classes(std::span<const int> seeds, int classes);

// Synchronous update: every unlabeled row of `next` becomes the mean of its
// neighbors' rows in `current`; labeled rows are copied. Unlabeled nodes with
// no neighbors keep their current row and are appended to `isolated` when
// given. Rows are split across `workers` threads; the result is identical for
// any worker count.
void propagation_step(const DominationMatrix& current, const PixelGraph& graph,
                      DominationMatrix& next, int workers = 1,
                      std::vector<std::size_t>* isolated = nullptr);

DominationMatrix propagation_step(const DominationMatrix& current,
                                  const PixelGraph& graph, int workers = 1);

// Mean over unlabeled nodes of the largest domination level; 1 when every
// node is labeled. Summed in node order.
double convergence_statistic(const DominationMatrix& dom);

// Stopping rule: the statistic is evaluated every check_interval iterations
// (baseline at iteration 0) and the run stops once it rises by less than
// epsilon between consecutive checkpoints, or at max_iterations.
class ConvergenceMonitor {
 public:
  int check_interval = 10;
  double epsilon = 1e-3;
  int max_iterations = 10000;

  void reset(double baseline);
  [[nodiscard]] bool checkpoint_due(int iteration) const {
    return check_interval > 0 && iteration % check_interval == 0;
  }
  // Records the checkpoint value; true when the rise is below epsilon.
  bool observe(int iteration, double statistic);

  [[nodiscard]] double last_statistic() const { return last_statistic_; }
  [[nodiscard]] int last_checkpoint() const { return iteration_; }

  void validate() const;

 private:
  double last_statistic_ = 0.0;
  int iteration_ = 0;
};

struct Checkpoint {
  int iteration = 0;
  double statistic = 0.0;
};

struct PropagationOptions {
  int workers = 1;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct PropagationResult {
  DominationMatrix domination;
  int iterations = 0;
  bool converged = false;
  std::vector<Checkpoint> checkpoints;
  std::vector<std::size_t> isolated_nodes;  // unlabeled, degree 0
};

PropagationResult run_propagation(DominationMatrix initial, const PixelGraph& graph,
                                  ConvergenceMonitor monitor = {},
                                  const PropagationOptions& options = {});

// Argmax per node, ties to the lowest class. Values are 1-based class ids.
std::vector<int> decode_labels(const DominationMatrix& dom);

}  // namespace lpknn
