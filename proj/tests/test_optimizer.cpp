#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lpknn/error.hpp"
#include "lpknn/optimizer.hpp"
#include "support/fixtures.hpp"

namespace lpknn {
namespace {

struct Problem {
  testing::TwoTone scene = testing::two_tone(16);
  SeedMap seeds = decode_trimap(scene.trimap);
  GroundTruth truth = decode_ground_truth(scene.truth);

  FitnessEvaluator evaluator() const { return {scene.image, seeds, truth}; }
};

GaConfig small_config() {
  GaConfig c;
  c.population_size = 8;
  c.generations = 3;
  c.k_max = 20;
  c.rng_seed = 7;
  return c;
}

TEST(GaRandom, UniformMatchesTopBitsOfTheEngine) {
  std::mt19937_64 engine(99);
  GaRandom rng(99);
  for (int i = 0; i < 100; ++i) {
    const double want = static_cast<double>(engine() >> 11) / 9007199254740992.0;
    ASSERT_EQ(rng.uniform(), want);
  }
}

TEST(GaRandom, IntegerRangeAndNormalMoments) {
  GaRandom rng(5);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const int v = rng.uniform_int(3, 9);
    ASSERT_GE(v, 3);
    ASSERT_LE(v, 9);
    ++hits[v - 3];
  }
  for (int h : hits) EXPECT_GT(h, 800);
  EXPECT_EQ(rng.uniform_int(4, 4), 4);

  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(GaConfigJson, ParsesKnownKeysAndRejectsOthers) {
  const auto j = nlohmann::json::parse(
      R"({"population_size": 10, "generations": 2, "k_range": [2, 9], "rng_seed": 3,
          "mutation_rate": 0.1, "crossover_rate": 0.5, "elitism": 1})");
  const GaConfig c = ga_config_from_json(j);
  EXPECT_EQ(c.population_size, 10);
  EXPECT_EQ(c.generations, 2);
  EXPECT_EQ(c.k_min, 2);
  EXPECT_EQ(c.k_max, 9);
  EXPECT_EQ(c.rng_seed, 3u);
  EXPECT_EQ(c.elitism, 1);
  EXPECT_THROW(ga_config_from_json(nlohmann::json::parse(R"({"popsize": 3})")), ParamError);
  EXPECT_THROW(ga_config_from_json(nlohmann::json::parse(R"({"k_range": [5, 2]})")),
               ParamError);
  EXPECT_THROW(ga_config_from_json(nlohmann::json::parse(R"({"generations": "x"})")),
               ParamError);
}

TEST(GaConfigJson, Defaults) {
  const GaConfig c;
  EXPECT_EQ(c.population_size, 50);
  EXPECT_EQ(c.generations, 30);
  EXPECT_EQ(c.crossover_rate, 0.8);
  EXPECT_EQ(c.mutation_rate, 0.05);
  EXPECT_EQ(c.elitism, 2);
  EXPECT_EQ(c.k_min, 1);
  EXPECT_EQ(c.k_max, 100);
}

TEST(Fitness, EqualsPipelineErrorAndIsMemoized) {
  const Problem p;
  auto ev = p.evaluator();
  Genome g;
  g.k = 6;
  const double f = ev.evaluate(g);
  const auto direct = segment(p.scene.image, p.seeds, g.params());
  EXPECT_EQ(f, error_rate(direct, p.truth, p.seeds));
  EXPECT_EQ(ev.evaluate(g), f);
  EXPECT_EQ(ev.cache_size(), 1u);
}

TEST(Fitness, AllZeroLambdaMatchesReference) {
  // Every feature vector collapses to the origin, so neighbors come from the
  // id tie rule alone.
  const Problem p;
  auto ev = p.evaluator();
  Genome g;
  g.k = 5;
  g.lambda.fill(0.0);
  const auto ref = testing::reference_segment(p.scene.image, p.seeds, g.params());
  SegmentationResult as_result;
  as_result.width = as_result.height = 16;
  as_result.labels = ref.labels;
  EXPECT_EQ(ev.evaluate(g), error_rate(as_result, p.truth, p.seeds));
}

TEST(Fitness, FailedRunScoresOne) {
  const Problem p;
  auto ev = p.evaluator();
  Genome g;
  g.k = 10000;
  EXPECT_EQ(ev.evaluate(g), 1.0);
  ASSERT_EQ(ev.failures().size(), 1u);
  EXPECT_NE(ev.failures()[0].find("k=10000"), std::string::npos);
}

TEST(Optimize, ZeroGenerationsReturnsBestInitialGenome) {
  const Problem p;
  auto ev = p.evaluator();
  GaConfig c = small_config();
  c.generations = 0;
  const auto r = optimize(ev, c);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(*r.best.fitness, r.history[0].best);
  EXPECT_LE(r.history[0].best, r.history[0].mean);
}

TEST(Optimize, PlantedPerfectGenomeSurvivesByElitism) {
  const Problem p;
  auto ev = p.evaluator();
  Genome perfect;
  perfect.k = 6;
  ASSERT_EQ(ev.evaluate(perfect), 0.0);
  const auto r = optimize(ev, small_config(), std::span(&perfect, 1));
  EXPECT_EQ(*r.best.fitness, 0.0);
  for (const auto& h : r.history) EXPECT_EQ(h.best, 0.0);
}

TEST(Optimize, DeterministicForAFixedSeed) {
  const Problem p;
  auto ev1 = p.evaluator();
  auto ev2 = p.evaluator();
  GaConfig c = small_config();
  const auto a = optimize(ev1, c);
  c.workers = 4;
  const auto b = optimize(ev2, c);
  EXPECT_EQ(genome_to_json(a.best).dump(), genome_to_json(b.best).dump());
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].best, b.history[i].best);
    EXPECT_EQ(a.history[i].mean, b.history[i].mean);
  }
}

TEST(Optimize, BestNeverWorsensAndStaysInRange) {
  const Problem p;
  auto ev = p.evaluator();
  GaConfig c = small_config();
  c.k_min = 2;
  c.k_max = 12;
  c.mutation_rate = 0.5;
  const auto r = optimize(ev, c);
  double best = 2.0;
  for (const auto& h : r.history) {
    if (c.elitism > 0) { EXPECT_LE(h.best, best); }
    best = std::min(best, h.best);
  }
  EXPECT_EQ(*r.best.fitness, best);
  EXPECT_GE(r.best.k, 2);
  EXPECT_LE(r.best.k, 12);
  for (double w : r.best.lambda) {
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, 1.0);
  }
  EXPECT_EQ(r.history.size(), 4u);
}

TEST(Optimize, GenomeJsonCarriesOracleFlag) {
  Genome g;
  g.k = 4;
  g.fitness = 0.25;
  const auto j = genome_to_json(g);
  EXPECT_EQ(j["k"], 4);
  EXPECT_EQ(j["lambda"].size(), kFeatureCount);
  EXPECT_EQ(j["fitness"], 0.25);
  EXPECT_EQ(j["oracle_tuned"], true);
}

TEST(Optimize, RejectsInvalidConfig) {
  const Problem p;
  auto ev = p.evaluator();
  GaConfig c = small_config();
  c.elitism = 9;
  EXPECT_THROW(optimize(ev, c), ParamError);
}

}  // namespace
}  // namespace lpknn
