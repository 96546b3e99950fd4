// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "ponv/automl.hpp"

using namespace ponv;

namespace {

int hamming(const PipelineGenome& a, const PipelineGenome& b) {
  int d = 0;
  d += a.imputer != b.imputer;
  d += a.scaler != b.scaler;
  d += a.selector_m != b.selector_m;
  d += !(a.model == b.model);
  return d;
}

Dataset quick_synth(size_t n, uint64_t seed) {
  SynthConfig cfg;
  cfg.n = n;
  cfg.informative = 3;
  cfg.noise = 3;
  cfg.prevalence_early = 0.4;
  cfg.prevalence_delayed = 0.4;
  cfg.demographics = true;
  return synth_generate(cfg, seed);
}

// small grammar for fast searches
Grammar small_grammar() {
  Grammar g;
  g.selector_m = {0, 4};
  g.models.clear();
  for (int depth : {2, 4}) {
    ModelSpec m;
    m.family = ModelFamily::tree;
    m.max_depth = depth;
    m.min_samples_leaf = 5;
    m.n_trees = 1;
    g.models.push_back(m);
  }
  {
    ModelSpec m;
    m.family = ModelFamily::boosted;
    m.max_depth = 2;
    m.min_samples_leaf = 1;
    m.n_trees = 30;
    m.learning_rate = 0.3;
    g.models.push_back(m);
  }
  return g;
}

}  // namespace

TEST_CASE("genome: canonical string round-trips", "[automl][property]") {
  const Grammar g = Grammar::defaults();
  Rng rng(12);
  for (int i = 0; i < 300; ++i) {
    const PipelineGenome a = g.random(rng);
    const PipelineGenome b = PipelineGenome::parse(a.canonical());
    REQUIRE(a == b);
    REQUIRE(a.canonical() == b.canonical());
  }
  REQUIRE_THROWS_AS(PipelineGenome::parse("imp=bogus|scl=none|sel=none|model=tree(depth=3)"),
                    ConfigError);
  REQUIRE_THROWS_AS(PipelineGenome::parse("no genes here"), ConfigError);
}

TEST_CASE("mutate: Hamming distance exactly one", "[automl][property]") {
  const Grammar g = Grammar::defaults();
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const PipelineGenome a = g.random(rng);
    const PipelineGenome b = g.mutate(a, rng);
    REQUIRE(hamming(a, b) == 1);
    REQUIRE(g.contains(b));
  }
}

TEST_CASE("crossover: idempotent on identical parents", "[automl]") {
  const Grammar g = Grammar::defaults();
  Rng rng(14);
  const PipelineGenome a = g.random(rng);
  for (int i = 0; i < 20; ++i) REQUIRE(g.crossover(a, a, rng) == a);
}

TEST_CASE("crossover: every output gene comes from a parent", "[automl][property]") {
  const Grammar g = Grammar::defaults();
  Rng rng(15);
  for (int i = 0; i < 10000; ++i) {
    const PipelineGenome a = g.random(rng);
    const PipelineGenome b = g.random(rng);
    const PipelineGenome c = g.crossover(a, b, rng);
    REQUIRE((c.imputer == a.imputer || c.imputer == b.imputer));
    REQUIRE((c.scaler == a.scaler || c.scaler == b.scaler));
    REQUIRE((c.selector_m == a.selector_m || c.selector_m == b.selector_m));
    REQUIRE((c.model == a.model || c.model == b.model));
    REQUIRE(g.contains(c));
  }
}

TEST_CASE("evolve: singleton search space returns it with constant history", "[automl]") {
  const Dataset train = quick_synth(150, 3);
  const Partition inner = random_partition(train, 3, 5);
  Grammar g;
  g.imputers = {ImputerKind::median_mode};
  g.scalers = {ScalerKind::none};
  g.selector_m = {0};
  ModelSpec only;
  only.family = ModelFamily::tree;
  only.max_depth = 3;
  only.min_samples_leaf = 5;
  only.n_trees = 1;
  g.models = {only};
  EvolutionParams params;
  params.population = 4;
  params.generations = 3;
  params.seed = 9;
  const EvolveResult res = evolve(train, inner, g, params, "PONV_PACU");
  REQUIRE(res.best.model == only);
  for (double h : res.history) REQUIRE(h == res.history[0]);
  REQUIRE(res.evaluations == 1);  // cache collapses duplicates
}

TEST_CASE("evolve: planted signal beats or matches the all-default genome", "[automl]") {
  const Dataset train = quick_synth(400, 21);
  const Partition inner = random_partition(train, 3, 6);
  EvolutionParams params;
  params.population = 8;
  params.generations = 4;
  params.seed = 77;
  const Grammar g = Grammar::defaults();
  const EvolveResult res = evolve(train, inner, g, params, "PONV_PACU");
  const double default_fitness =
      genome_fitness(PipelineGenome{}, train, inner, "PONV_PACU", params.seed);
  REQUIRE(res.best_fitness >= default_fitness);
}

TEST_CASE("evolve: deterministic per seed, monotone best-so-far", "[automl]") {
  const Dataset train = quick_synth(200, 31);
  const Partition inner = random_partition(train, 3, 7);
  EvolutionParams params;
  params.population = 6;
  params.generations = 3;
  params.seed = 123;
  const Grammar g = small_grammar();
  const EvolveResult a = evolve(train, inner, g, params, "PONV_PACU");
  const EvolveResult b = evolve(train, inner, g, params, "PONV_PACU");
  REQUIRE(a.best.canonical() == b.best.canonical());
  REQUIRE(a.history == b.history);
  for (size_t i = 1; i < a.history.size(); ++i) REQUIRE(a.history[i] >= a.history[i - 1]);
  // worker count must not change the outcome
  const EvolveResult par = evolve(train, inner, g, params, "PONV_PACU", 4);
  REQUIRE(par.best.canonical() == a.best.canonical());
  REQUIRE(par.history == a.history);
}

TEST_CASE("evolve: degenerate training data scores zero and never aborts", "[automl]") {
  // constant target: every inner training fold is single-class
  SynthConfig cfg;
  cfg.n = 60;
  cfg.informative = 2;
  cfg.noise = 1;
  cfg.prevalence_early = 0.5;
  Dataset base = synth_generate(cfg, 4);
  std::vector<std::vector<double>> cols;
  std::vector<std::vector<uint8_t>> miss;
  for (size_t c = 0; c < base.schema().size(); ++c) {
    cols.push_back(base.column(c));
    miss.push_back(base.missing_flags(c));
  }
  const size_t t_idx = base.schema().index_of("PONV_PACU");
  for (double& v : cols[t_idx]) v = 1.0;
  const Dataset constant = Dataset::from_parts(base.schema(), std::move(cols), std::move(miss));
  const Partition inner = random_partition(constant, 3, 2);
  EvolutionParams params;
  params.population = 4;
  params.generations = 2;
  params.seed = 5;
  const EvolveResult res = evolve(constant, inner, small_grammar(), params, "PONV_PACU");
  REQUIRE(res.best_fitness == 0.0);
  REQUIRE_FALSE(res.failures.empty());
}

TEST_CASE("genome_fitness: leakage guard rejects mismatched partitions", "[automl]") {
  const Dataset train = quick_synth(100, 8);
  const Dataset bigger = quick_synth(150, 8);
  const Partition wrong = random_partition(bigger, 3, 1);
  REQUIRE_THROWS_AS(genome_fitness(PipelineGenome{}, train, wrong, "PONV_PACU", 0), ContractError);
}

TEST_CASE("grid_search: singleton grid returns that cell", "[automl]") {
  const Dataset train = quick_synth(150, 9);
  const Partition inner = random_partition(train, 3, 3);
  ModelSpec only;
  only.family = ModelFamily::tree;
  only.max_depth = 4;
  only.min_samples_leaf = 5;
  only.n_trees = 1;
  const GridSearchResult res = grid_search(PipelineGenome{}, {only}, train, inner, "PONV_PACU", 2);
  REQUIRE(res.best == only);
  REQUIRE(res.best_index == 0);
}

TEST_CASE("grid_search: argmax verified exhaustively, ties to first declared", "[automl]") {
  const Dataset train = quick_synth(250, 10);
  const Partition inner = random_partition(train, 3, 4);
  std::vector<ModelSpec> grid;
  for (int depth : {2, 3, 4}) {
    ModelSpec m;
    m.family = ModelFamily::tree;
    m.max_depth = depth;
    m.min_samples_leaf = 5;
    m.n_trees = 1;
    grid.push_back(m);
  }
  // duplicate the first cell at the end: a guaranteed tie must keep index 0's cell
  grid.push_back(grid[0]);
  const GridSearchResult res = grid_search(PipelineGenome{}, grid, train, inner, "PONV_PACU", 11);
  for (double acc : res.accuracies) REQUIRE(res.accuracies[res.best_index] >= acc);
  REQUIRE(res.accuracies[0] == res.accuracies[3]);
  if (res.accuracies[res.best_index] == res.accuracies[0]) REQUIRE(res.best_index < 3);
  // independent recomputation of each cell
  for (size_t i = 0; i < grid.size(); ++i) {
    PipelineGenome g;
    g.model = grid[i];
    REQUIRE(genome_fitness(g, train, inner, "PONV_PACU", 11) == res.accuracies[i]);
  }
}

TEST_CASE("evolution params: validation", "[automl]") {
  EvolutionParams p;
  p.population = 1;
  REQUIRE_THROWS_AS(p.validate(), ConfigError);
  p = EvolutionParams{};
  p.crossover_rate = 1.5;
  REQUIRE_THROWS_AS(p.validate(), ConfigError);
  p = EvolutionParams{};
  p.elitism = p.population;
  REQUIRE_THROWS_AS(p.validate(), ConfigError);
}
