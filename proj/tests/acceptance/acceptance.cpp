// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lpknn/knn_graph.hpp"
#include "lpknn/pipeline.hpp"
#include "lpknn/propagation.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace {

using namespace lpknn;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

void fail(Outcome& o, const std::string& why) {
  if (o.pass) o.detail = why;
  o.pass = false;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
}

// ---- 1: propagation vs dense recurrence -------------------------------------

Outcome propagation_oracle() {
  constexpr double kTol = 1e-12;
  constexpr int kGraphs = 50;
  constexpr int kIterations = 100;
  Outcome o;
  std::mt19937 rng(20240601);
  double worst = 0.0;
  const auto start = Clock::now();
  for (int t = 0; t < kGraphs; ++t) {
    const auto rg = testing::random_graph(rng, 30);
    const PixelGraph g = graph_from_edges(rg.n, testing::to_edges(rg.edges));
    const testing::Dense w = testing::averaging_matrix(rg.n, rg.edges);
    testing::Dense v = testing::dense_init(rg.seeds, rg.classes);
    DominationMatrix d = init_domination(rg.seeds, rg.classes);
    for (int it = 0; it < kIterations; ++it) {
      d = propagation_step(d, g);
      v = testing::dense_step(w, v, rg.seeds);
      for (std::size_t i = 0; i < rg.n; ++i) {
        for (int c = 0; c < rg.classes; ++c) {
          worst = std::max(worst, std::abs(d.row(i)[c] - v[i][c]));
        }
      }
    }
    // The driver must land on the same state when held to exactly 100 steps.
    ConvergenceMonitor hold;
    hold.epsilon = -INFINITY;
    hold.max_iterations = kIterations;
    const auto run = run_propagation(init_domination(rg.seeds, rg.classes), g, hold);
    if (run.iterations != kIterations || !same_bits(run.domination.values(), d.values())) {
      fail(o, fmt("graph %d: run_propagation differs from stepping", t));
    }
  }
  const double secs = seconds_since(start);
  if (worst > kTol) fail(o, fmt("max deviation %.3e > %.0e", worst, kTol));
  if (secs >= 10.0) fail(o, fmt("took %.2f s (limit 10 s)", secs));
  if (o.pass) {
    o.detail = fmt("%d graphs x %d iterations, max deviation %.2e (tol 1e-12), %.2f s",
                   kGraphs, kIterations, worst, secs);
  }
  return o;
}

// ---- 2: kNN vs exhaustive scan ----------------------------------------------

Outcome knn_oracle() {
  Outcome o;
  std::mt19937 rng(77);
  const auto start = Clock::now();
  int instances = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 200)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 23)(rng);
    const int k = std::uniform_int_distribution<int>(1, std::min<int>(10, n - 1))(rng);
    std::vector<double> pts(n * d);
    // A third of the instances sit on a coarse integer grid to force ties.
    if (t % 3 == 0) {
      std::uniform_int_distribution<int> cell(0, 3);
      for (double& x : pts) x = cell(rng);
    } else {
      std::normal_distribution<double> nd;
      for (double& x : pts) x = nd(rng);
    }
    const PixelGraph g = build_knn_graph(PointSet{pts, d}, k);
    testing::EdgeSet got;
    for (const auto& [a, b] : edge_list(g)) got.emplace(a, b);
    if (got != testing::brute_knn_edges(pts, d, k)) {
      fail(o, fmt("instance %d (n=%zu d=%zu k=%d) edge sets differ", t, n, d, k));
    }
    ++instances;
  }
  const double secs = seconds_since(start);
  if (secs >= 30.0) fail(o, fmt("took %.2f s (limit 30 s)", secs));
  if (o.pass) o.detail = fmt("%d instances identical, %.2f s", instances, secs);
  return o;
}

// ---- 3: invariants ----------------------------------------------------------

void check_rows(Outcome& o, const DominationMatrix& d0, const DominationMatrix& d,
                const std::string& where) {
  for (std::size_t i = 0; i < d.nodes(); ++i) {
    double sum = 0.0;
    for (double v : d.row(i)) {
      if (!(v >= 0.0 && v <= 1.0)) fail(o, where + ": value outside [0,1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail(o, where + fmt(": row %zu sums to %.17g", i, sum));
    if (d.labeled(i) && !same_bits(d.row(i), d0.row(i))) {
      fail(o, where + fmt(": labeled row %zu changed", i));
    }
  }
}

void check_symmetric(Outcome& o, const PixelGraph& g, const std::string& where) {
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    for (NodeId j : g.neighbors_of(i)) {
      const auto back = g.neighbors_of(j);
      if (j == i || !std::binary_search(back.begin(), back.end(), static_cast<NodeId>(i))) {
        fail(o, where + fmt(": edge %zu-%u not symmetric", i, j));
      }
    }
  }
}

void check_seeds(Outcome& o, const SegmentationResult& r, const SeedMap& s,
                 const std::string& where) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.roles[i] >= 1 && r.labels[i] != s.roles[i]) {
      fail(o, where + fmt(": seed pixel %zu relabeled", i));
    }
  }
}

Outcome invariants() {
  Outcome o;
  int fixtures = 0;
  std::mt19937 rng(31337);
  for (int t = 0; t < 40; ++t, ++fixtures) {
    const auto rg = testing::random_graph(rng, 40);
    const PixelGraph g = graph_from_edges(rg.n, testing::to_edges(rg.edges));
    const DominationMatrix d0 = init_domination(rg.seeds, rg.classes);
    DominationMatrix d = d0;
    for (int it = 0; it < 200; ++it) {
      d = propagation_step(d, g);
      check_rows(o, d0, d, fmt("random graph %d", t));
    }
  }

  // Pixel fixtures: the two-tone scene, a duplicate-vector scene (flat color,
  // position weights zeroed), a single pixel and an all-seeded image.
  const auto scene = testing::two_tone(32);
  const SeedMap scene_seeds = decode_trimap(scene.trimap);
  SegParams flat_params;
  flat_params.k = 4;
  flat_params.lambda[0] = flat_params.lambda[1] = 0.0;
  RgbImage flat(12, 12);
  for (auto& p : flat.pixels) p = {0.3, 0.5, 0.7};
  GrayImage flat_trimap(12, 12, 128);
  flat_trimap.at(0, 0) = 255;
  flat_trimap.at(11, 11) = 64;
  const SeedMap flat_seeds = decode_trimap(flat_trimap);

  struct Case {
    std::string name;
    const RgbImage* image;
    const SeedMap* seeds;
    SegParams params;
  };
  const std::vector<Case> cases = {{"two-tone 32x32", &scene.image, &scene_seeds, {8, unit_weights()}},
                                   {"duplicate vectors", &flat, &flat_seeds, flat_params}};
  for (const Case& c : cases) {
    ++fixtures;
    FeatureMatrix f = node_features(*c.image, *c.seeds);
    scale_columns(f, c.params.lambda);
    const PixelGraph g = build_pixel_graph(f, *c.seeds, c.params.k);
    check_symmetric(o, g, c.name);
    std::vector<int> node_seeds;
    for (int r : c.seeds->roles) {
      if (r != kIgnored) node_seeds.push_back(r);
    }
    const DominationMatrix d0 = init_domination(node_seeds, c.seeds->class_count);
    const auto run = run_propagation(d0, g);
    check_rows(o, d0, run.domination, c.name);
    const auto a = segment(*c.image, *c.seeds, c.params);
    const auto b = segment(*c.image, *c.seeds, c.params);
    check_seeds(o, a, *c.seeds, c.name);
    if (a.labels != b.labels || a.iterations != b.iterations ||
        a.checkpoints.size() != b.checkpoints.size()) {
      fail(o, c.name + ": two runs differ");
    }
    for (std::size_t i = 0; i < a.checkpoints.size() && i < b.checkpoints.size(); ++i) {
      if (std::memcmp(&a.checkpoints[i].statistic, &b.checkpoints[i].statistic,
                      sizeof(double)) != 0) {
        fail(o, c.name + ": checkpoint statistics differ between runs");
      }
    }
  }

  ++fixtures;
  const auto one = segment(RgbImage(1, 1), decode_trimap(GrayImage(1, 1, 255)), SegParams{});
  if (one.labels != std::vector<int>{1} || one.iterations != 0) fail(o, "1x1 image");

  ++fixtures;
  GrayImage seeded(4, 4, 255);
  for (int c = 0; c < 4; ++c) seeded.at(3, c) = 64;
  const SeedMap all_seeded = decode_trimap(seeded);
  const auto full = segment(testing::two_tone(4).image, all_seeded, SegParams{});
  check_seeds(o, full, all_seeded, "all-seeded");
  if (full.iterations != 0) fail(o, "all-seeded image iterated");

  if (o.pass) o.detail = fmt("%d fixtures, all invariants hold", fixtures);
  return o;
}

// ---- 4: synthetic end to end ------------------------------------------------

Outcome synthetic_end_to_end() {
  Outcome o;
  const auto t = testing::two_tone(64);
  const SeedMap seeds = decode_trimap(t.trimap);
  std::size_t per_class[3] = {0, 0, 0};
  for (int r : seeds.roles) {
    if (r >= 1) ++per_class[r];
  }
  if (per_class[1] != 5 || per_class[2] != 5) fail(o, "fixture must carry 5 seeds per class");
  const SegParams params;  // k = 10, unit lambda
  const auto start = Clock::now();
  const auto result = segment(t.image, seeds, params);
  const double secs = seconds_since(start);
  const double err = error_rate(result, decode_ground_truth(t.truth), seeds);
  const auto ref = testing::reference_segment(t.image, seeds, params);
  if (err != 0.0) fail(o, fmt("error rate %.4f", err));
  if (result.labels != ref.labels) fail(o, "labels differ from the brute-force pipeline");
  if (secs >= 5.0) fail(o, fmt("took %.2f s (limit 5 s)", secs));
  if (o.pass) {
    o.detail = fmt("error 0.000, matches brute-force pipeline, %d iterations, %.2f s",
                   result.iterations, secs);
  }
  return o;
}

// ---- 6 (stand-in): convergence report on the synthetic scene -----------------

Outcome convergence_report() {
  Outcome o;
  const auto t = testing::two_tone(64);
  const SeedMap seeds = decode_trimap(t.trimap);
  std::string log;
  for (int k : {5, 20, 80}) {
    SegParams params;
    params.k = k;
    int reported = 0;
    SegmentOptions opts;
    opts.on_checkpoint = [&](const Checkpoint&) { ++reported; };
    const auto r = segment(t.image, seeds, params, opts);
    if (!r.converged || r.iterations >= 10000) fail(o, fmt("k=%d hit the iteration cap", k));
    if (reported != r.iterations / 10) fail(o, fmt("k=%d: checkpoints not reported", k));
    log += fmt("%sk=%d: %d iterations", log.empty() ? "" : ", ", k, r.iterations);
  }
  o.detail = log;
  return o;
}

// ---- 7: parallel determinism ------------------------------------------------

Outcome parallel_determinism() {
  Outcome o;
  const auto t = testing::two_tone(64);
  const SeedMap seeds = decode_trimap(t.trimap);
  const SegParams params;
  FeatureMatrix f = node_features(t.image, seeds);
  scale_columns(f, params.lambda);
  std::vector<int> node_seeds(seeds.roles.begin(), seeds.roles.end());

  std::optional<PropagationResult> base;
  std::optional<SegmentationResult> base_seg;
  for (int workers : {1, 2, 8}) {
    const PixelGraph g = build_pixel_graph(f, seeds, params.k, workers);
    PropagationOptions popts;
    popts.workers = workers;
    auto run = run_propagation(init_domination(node_seeds, 2), g, {}, popts);
    SegmentOptions sopts;
    sopts.workers = workers;
    auto seg = segment(t.image, seeds, params, sopts);
    if (!base) {
      base = std::move(run);
      base_seg = std::move(seg);
      continue;
    }
    if (run.iterations != base->iterations ||
        !same_bits(run.domination.values(), base->domination.values())) {
      fail(o, fmt("domination differs with %d workers", workers));
    }
    if (seg.labels != base_seg->labels) fail(o, fmt("labels differ with %d workers", workers));
  }
  if (o.pass) {
    o.detail = fmt("workers 1, 2, 8 bit-identical over %zu x 2 entries, %d iterations",
                   base->domination.nodes(), base->iterations);
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"1", "propagation oracle equivalence", propagation_oracle},
      {"2", "kNN oracle equivalence", knn_oracle},
      {"3", "invariant suite", invariants},
      {"4", "synthetic end-to-end 64x64", synthetic_end_to_end},
      {"7", "parallel determinism", parallel_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s [%s] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
  }
  std::printf("SKIP [5] GrabCut reproduction: needs the dataset; see the grabcut_acceptance test\n");
  std::printf("SKIP [6] convergence on the llama image: needs the dataset; see grabcut_acceptance\n");
  const Outcome report = convergence_report();
  std::printf("INFO [6] synthetic stand-in, stop rule before cap %s: %s\n",
              report.pass ? "held" : "VIOLATED", report.detail.c_str());
  failures += report.pass ? 0 : 1;
  std::printf("%s\n", failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED");
  return failures == 0 ? 0 : 1;
}
