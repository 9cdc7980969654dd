#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpknn/features.hpp"
#include "lpknn/pipeline.hpp"

namespace lpknn {

// Genetic search over (k, lambda). Tournament selection of size 3, uniform
// crossover, per-gene mutation (k redrawn from its range, lambda perturbed by
// N(0, 0.1) and clamped to [0,1]) and elitism.
struct GaConfig {
  int population_size = 50;
  int generations = 30;
  double crossover_rate = 0.8;
  double mutation_rate = 0.05;
  int elitism = 2;
  int k_min = 1;
  int k_max = 100;
  std::uint64_t rng_seed = 1;
  int workers = 1;  // parallel fitness evaluations

  void validate() const;
};

inline constexpr int kTournamentSize = 3;
inline constexpr double kLambdaMutationSigma = 0.1;

GaConfig ga_config_from_json(const nlohmann::json& j, GaConfig base = {});
GaConfig read_ga_config(const std::filesystem::path& path, GaConfig base = {});

struct Genome {
  int k = 10;
  FeatureWeights lambda = unit_weights();
  std::optional<double> fitness;

  [[nodiscard]] SegParams params() const { return {k, lambda}; }
};

// {"k", "lambda", "fitness", "oracle_tuned"}
nlohmann::json genome_to_json(const Genome& g);

struct GenerationStats {
  int generation = 0;
  double best = 0.0;
  double mean = 0.0;
};

struct OptimizeResult {
  Genome best;
  std::vector<GenerationStats> history;
  std::size_t evaluations = 0;  // distinct genomes evaluated
};

// Error-rate fitness for one (image, seeds, ground truth) triple. Features are
// normalized once; each evaluation only rescales them. Results are memoized
// on the genome bytes and safe to request from several threads.
class FitnessEvaluator {
 public:
  FitnessEvaluator(const RgbImage& image, SeedMap seeds, GroundTruth truth,
                   SegmentOptions options = {});

  double evaluate(const Genome& genome);

  [[nodiscard]] std::size_t cache_size() const;
  // Diagnostics for genomes whose pipeline run failed (fitness 1.0).
  [[nodiscard]] std::vector<std::string> failures() const;

 private:
  double compute(const Genome& genome);

  FeatureMatrix normalized_;
  SeedMap seeds_;
  GroundTruth truth_;
  SegmentOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, double> memo_;
  std::vector<std::string> failures_;
};

// mt19937_64 with distribution code kept here so sequences do not depend on
// the standard library's distribution implementations.
class GaRandom {
 public:
  explicit GaRandom(std::uint64_t seed) : engine_(seed) {}
  double uniform();                 // [0,1)
  int uniform_int(int lo, int hi);  // inclusive
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// `planted` genomes seed the initial population ahead of random ones.
OptimizeResult optimize(FitnessEvaluator& evaluator, const GaConfig& config,
                        std::span<const Genome> planted = {});

}  // namespace lpknn
