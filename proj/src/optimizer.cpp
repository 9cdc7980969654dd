#include "lpknn/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "lpknn/error.hpp"

namespace lpknn {

void GaConfig::validate() const {
  if (population_size < 4) throw ParamError("population_size must be >= 4");
  if (generations < 0) throw ParamError("generations must be >= 0");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) {
    throw ParamError("crossover_rate must be in [0,1]");
  }
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
    throw ParamError("mutation_rate must be in [0,1]");
  }
  if (elitism < 0 || elitism > population_size) {
    throw ParamError("elitism must be in [0, population_size]");
  }
  if (k_min < 1 || k_max < k_min) throw ParamError("k range must satisfy 1 <= k_min <= k_max");
  if (workers < 1) throw ParamError("workers must be >= 1");
}

GaConfig ga_config_from_json(const nlohmann::json& j, GaConfig base) {
  if (!j.is_object()) throw ParamError("GA config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "population_size") base.population_size = value.get<int>();
      else if (key == "generations") base.generations = value.get<int>();
      else if (key == "crossover_rate") base.crossover_rate = value.get<double>();
      else if (key == "mutation_rate") base.mutation_rate = value.get<double>();
      else if (key == "elitism") base.elitism = value.get<int>();
      else if (key == "k_range") {
        const auto r = value.get<std::vector<int>>();
        if (r.size() != 2) throw ParamError("k_range must be [min, max]");
        base.k_min = r[0];
        base.k_max = r[1];
      } else if (key == "rng_seed") base.rng_seed = value.get<std::uint64_t>();
      else if (key == "workers") base.workers = value.get<int>();
      else throw ParamError("unknown GA config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParamError(std::string("GA config: ") + e.what());
  }
  base.validate();
  return base;
}

GaConfig read_ga_config(const std::filesystem::path& path, GaConfig base) {
  std::ifstream in(path);
  if (!in) throw ParamError("cannot open GA config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParamError(path.string() + ": " + e.what());
  }
  return ga_config_from_json(j, base);
}

nlohmann::json genome_to_json(const Genome& g) {
  nlohmann::json j;
  j["k"] = g.k;
  j["lambda"] = g.lambda;
  j["fitness"] = g.fitness ? nlohmann::json(*g.fitness) : nlohmann::json(nullptr);
  j["oracle_tuned"] = true;
  return j;
}

// ---- fitness ---------------------------------------------------------------

FitnessEvaluator::FitnessEvaluator(const RgbImage& image, SeedMap seeds,
                                   GroundTruth truth, SegmentOptions options)
    : seeds_(std::move(seeds)), truth_(std::move(truth)), options_(std::move(options)) {
  if (image.width != seeds_.width || image.height != seeds_.height ||
      truth_.width != seeds_.width || truth_.height != seeds_.height) {
    throw DimensionError("image, seeds and ground truth must share dimensions");
  }
  normalized_ = node_features(image, seeds_);
}

namespace {

std::string genome_key(const Genome& g) {
  std::string key(sizeof(int) + sizeof(double) * kFeatureCount, '\0');
  std::memcpy(key.data(), &g.k, sizeof(int));
  std::memcpy(key.data() + sizeof(int), g.lambda.data(), sizeof(double) * kFeatureCount);
  return key;
}

}  // namespace

double FitnessEvaluator::compute(const Genome& genome) {
  try {
    const SegParams params = genome.params();
    params.validate();
    FeatureMatrix features = normalized_;
    scale_columns(features, params.lambda);
    const SegmentationResult result =
        segment_features(features, seeds_, params.k, options_);
    return error_rate(result, truth_, seeds_);
  } catch (const std::exception& e) {
    std::lock_guard lock(mutex_);
    failures_.push_back("k=" + std::to_string(genome.k) + ": " + e.what());
    return 1.0;
  }
}

double FitnessEvaluator::evaluate(const Genome& genome) {
  const std::string key = genome_key(genome);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  }
  const double fitness = compute(genome);
  std::lock_guard lock(mutex_);
  return memo_.try_emplace(key, fitness).first->second;
}

std::size_t FitnessEvaluator::cache_size() const {
  std::lock_guard lock(mutex_);
  return memo_.size();
}

std::vector<std::string> FitnessEvaluator::failures() const {
  std::lock_guard lock(mutex_);
  return failures_;
}

// ---- random numbers --------------------------------------------------------

double GaRandom::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int GaRandom::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int>(lo + static_cast<std::int64_t>(x % span));
}

double GaRandom::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

// ---- genetic algorithm -----------------------------------------------------

namespace {

class Population {
 public:
  Population(FitnessEvaluator& evaluator, int workers)
      : evaluator_(evaluator), workers_(workers) {}

  void evaluate(std::vector<Genome>& genomes) const {
    const auto n = static_cast<std::ptrdiff_t>(genomes.size());
#pragma omp parallel for num_threads(workers_) schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (!genomes[i].fitness) genomes[i].fitness = evaluator_.evaluate(genomes[i]);
    }
  }

 private:
  FitnessEvaluator& evaluator_;
  int workers_;
};

bool fitter(const std::vector<Genome>& pop, std::size_t a, std::size_t b) {
  const double fa = *pop[a].fitness;
  const double fb = *pop[b].fitness;
  return fa < fb || (fa == fb && a < b);
}

GenerationStats summarize(int generation, const std::vector<Genome>& pop) {
  GenerationStats s{generation, *pop.front().fitness, 0.0};
  for (const Genome& g : pop) {
    s.best = std::min(s.best, *g.fitness);
    s.mean += *g.fitness;
  }
  s.mean /= static_cast<double>(pop.size());
  return s;
}

std::size_t tournament(const std::vector<Genome>& pop, GaRandom& rng) {
  const int last = static_cast<int>(pop.size()) - 1;
  std::size_t winner = static_cast<std::size_t>(rng.uniform_int(0, last));
  for (int i = 1; i < kTournamentSize; ++i) {
    const auto challenger = static_cast<std::size_t>(rng.uniform_int(0, last));
    if (fitter(pop, challenger, winner)) winner = challenger;
  }
  return winner;
}

Genome random_genome(const GaConfig& config, GaRandom& rng) {
  Genome g;
  g.k = rng.uniform_int(config.k_min, config.k_max);
  for (double& w : g.lambda) w = rng.uniform();
  return g;
}

Genome clamp_genome(Genome g, const GaConfig& config) {
  g.k = std::clamp(g.k, config.k_min, config.k_max);
  for (double& w : g.lambda) w = std::clamp(w, 0.0, 1.0);
  g.fitness.reset();
  return g;
}

}  // namespace

OptimizeResult optimize(FitnessEvaluator& evaluator, const GaConfig& config,
                        std::span<const Genome> planted) {
  config.validate();
  GaRandom rng(config.rng_seed);
  const Population population(evaluator, config.workers);
  const auto size = static_cast<std::size_t>(config.population_size);

  std::vector<Genome> pop;
  pop.reserve(size);
  for (const Genome& g : planted) {
    if (pop.size() == size) break;
    pop.push_back(clamp_genome(g, config));
  }
  while (pop.size() < size) pop.push_back(random_genome(config, rng));
  population.evaluate(pop);

  OptimizeResult result;
  result.history.push_back(summarize(0, pop));
  auto best_of = [&](const std::vector<Genome>& p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (fitter(p, i, best)) best = i;
    }
    return p[best];
  };
  result.best = best_of(pop);

  for (int gen = 1; gen <= config.generations; ++gen) {
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fitter(pop, a, b); });

    std::vector<Genome> next;
    next.reserve(size);
    for (int e = 0; e < config.elitism; ++e) next.push_back(pop[order[e]]);
    while (next.size() < size) {
      Genome child = pop[tournament(pop, rng)];
      if (rng.uniform() < config.crossover_rate) {
        const Genome& other = pop[tournament(pop, rng)];
        if (rng.uniform() < 0.5) child.k = other.k;
        for (std::size_t c = 0; c < kFeatureCount; ++c) {
          if (rng.uniform() < 0.5) child.lambda[c] = other.lambda[c];
        }
      }
      if (rng.uniform() < config.mutation_rate) {
        child.k = rng.uniform_int(config.k_min, config.k_max);
      }
      for (double& w : child.lambda) {
        if (rng.uniform() < config.mutation_rate) {
          w = std::clamp(w + kLambdaMutationSigma * rng.normal(), 0.0, 1.0);
        }
      }
      child.fitness.reset();
      next.push_back(child);
    }
    pop = std::move(next);
    population.evaluate(pop);
    result.history.push_back(summarize(gen, pop));
    const Genome candidate = best_of(pop);
    if (*candidate.fitness < *result.best.fitness) result.best = candidate;
  }
  result.evaluations = evaluator.cache_size();
  return result;
}

}  // namespace lpknn
