#include "lpknn/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "lpknn/error.hpp"

namespace lpknn {

DominationMatrix::DominationMatrix(std::span<const int> seeds, int classes)
    : classes_(classes), seeds_(seeds.begin(), seeds.end()) {
  if (classes < 2) throw ParamError("need at least 2 classes, got " + std::to_string(classes));
  values_.assign(seeds_.size() * static_cast<std::size_t>(classes), 1.0 / classes);
  for (std::size_t i = 0; i < seeds_.size(); ++i) {
    const int c = seeds_[i];
    if (c == kUnlabeled) continue;
    if (c < 1 || c > classes) {
      throw ParamError("node " + std::to_string(i) + ": class " + std::to_string(c) +
                       " outside 1.." + std::to_string(classes));
    }
    auto r = row(i);
    std::fill(r.begin(), r.end(), 0.0);
    r[c - 1] = 1.0;
  }
}

DominationMatrix init_domination(std::span<const int> seeds, int classes) {
  return DominationMatrix(seeds, classes);
}

std::vector<int> unseeded_classes(std::span<const int> seeds, int classes) {
  std::vector<bool> seen(static_cast<std::size_t>(classes) + 1, false);
  for (int s : seeds) {
    if (s >= 1 && s <= classes) seen[s] = true;
  }
  std::vector<int> missing;
  for (int c = 1; c <= classes; ++c) {
    if (!seen[c]) missing.push_back(c);
  }
  return missing;
}

namespace {

void check_shapes(const DominationMatrix& a, const PixelGraph& graph) {
  if (a.nodes() != graph.node_count()) {
    throw DimensionError("domination matrix has " + std::to_string(a.nodes()) +
                         " rows but the graph has " +
                         std::to_string(graph.node_count()) + " nodes");
  }
}

std::vector<std::size_t> unlabeled_nodes(const DominationMatrix& dom) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dom.nodes(); ++i) {
    if (!dom.labeled(i)) out.push_back(i);
  }
  return out;
}

// Core of one synchronous step over the given unlabeled nodes.
void step_rows(const DominationMatrix& current, const PixelGraph& graph,
               DominationMatrix& next, std::span<const std::size_t> unlabeled,
               int workers) {
  const auto classes = static_cast<std::size_t>(current.classes());
  const auto count = static_cast<std::ptrdiff_t>(unlabeled.size());
#pragma omp parallel for num_threads(std::max(workers, 1)) schedule(static)
  for (std::ptrdiff_t u = 0; u < count; ++u) {
    const std::size_t i = unlabeled[u];
    const auto nbrs = graph.neighbors_of(i);
    auto out = next.row(i);
    if (nbrs.empty()) {
      const auto cur = current.row(i);
      std::copy(cur.begin(), cur.end(), out.begin());
      continue;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (NodeId j : nbrs) {
      const auto src = current.row(j);
      for (std::size_t c = 0; c < classes; ++c) out[c] += src[c];
    }
    const auto degree = static_cast<double>(nbrs.size());
    for (std::size_t c = 0; c < classes; ++c) out[c] /= degree;
  }
}

}  // namespace

void propagation_step(const DominationMatrix& current, const PixelGraph& graph,
                      DominationMatrix& next, int workers,
                      std::vector<std::size_t>* isolated) {
  check_shapes(current, graph);
  if (&current == &next) throw ParamError("propagation_step needs distinct buffers");
  if (next.nodes() != current.nodes() || next.classes() != current.classes() ||
      !std::equal(next.seeds().begin(), next.seeds().end(), current.seeds().begin())) {
    next = current;
  }
  const auto unlabeled = unlabeled_nodes(current);
  if (isolated) {
    for (std::size_t i : unlabeled) {
      if (graph.degree(i) == 0) isolated->push_back(i);
    }
  }
  step_rows(current, graph, next, unlabeled, workers);
}

DominationMatrix propagation_step(const DominationMatrix& current,
                                  const PixelGraph& graph, int workers) {
  DominationMatrix next = current;
  propagation_step(current, graph, next, workers);
  return next;
}

double convergence_statistic(const DominationMatrix& dom) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < dom.nodes(); ++i) {
    if (dom.labeled(i)) continue;
    const auto r = dom.row(i);
    sum += *std::max_element(r.begin(), r.end());
    ++count;
  }
  return count == 0 ? 1.0 : sum / static_cast<double>(count);
}

void ConvergenceMonitor::reset(double baseline) {
  last_statistic_ = baseline;
  iteration_ = 0;
}

bool ConvergenceMonitor::observe(int iteration, double statistic) {
  const double rise = statistic - last_statistic_;
  last_statistic_ = statistic;
  iteration_ = iteration;
  return rise < epsilon;
}

void ConvergenceMonitor::validate() const {
  if (check_interval < 1) throw ParamError("check_interval must be >= 1");
  if (max_iterations < 0) throw ParamError("max_iterations must be >= 0");
  if (std::isnan(epsilon)) throw ParamError("epsilon must not be NaN");
}

PropagationResult run_propagation(DominationMatrix initial, const PixelGraph& graph,
                                  ConvergenceMonitor monitor,
                                  const PropagationOptions& options) {
  check_shapes(initial, graph);
  monitor.validate();
  PropagationResult result;
  const auto unlabeled = unlabeled_nodes(initial);
  if (unlabeled.empty()) {
    result.domination = std::move(initial);
    result.converged = true;
    return result;
  }
  for (std::size_t i : unlabeled) {
    if (graph.degree(i) == 0) result.isolated_nodes.push_back(i);
  }

  monitor.reset(convergence_statistic(initial));
  // Double buffer: reads from `current`, writes to `next`, then swap.
  DominationMatrix current = std::move(initial);
  DominationMatrix next = current;
  int t = 0;
  while (t < monitor.max_iterations) {
    step_rows(current, graph, next, unlabeled, options.workers);
    std::swap(current, next);
    ++t;
    if (monitor.checkpoint_due(t)) {
      const Checkpoint cp{t, convergence_statistic(current)};
      result.checkpoints.push_back(cp);
      if (options.on_checkpoint) options.on_checkpoint(cp);
      if (monitor.observe(t, cp.statistic)) {
        result.converged = true;
        break;
      }
    }
  }
  result.iterations = t;
  result.domination = std::move(current);
  return result;
}

std::vector<int> decode_labels(const DominationMatrix& dom) {
  std::vector<int> labels(dom.nodes());
  for (std::size_t i = 0; i < dom.nodes(); ++i) {
    if (dom.labeled(i)) {
      labels[i] = dom.seed(i);
      continue;
    }
    const auto r = dom.row(i);
    // max_element returns the first maximum, i.e. the lowest class index.
    labels[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin()) + 1;
  }
  return labels;
}

}  // namespace lpknn
