// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "ponv/pipeline.hpp"
#include "ponv/splitter.hpp"

namespace ponv {

struct EvolutionParams {
  int population = 16;
  int generations = 8;
  int tournament = 3;
  double crossover_rate = 0.9;
  double mutation_rate = 0.3;
  int elitism = 2;
  int inner_k = 3;  // plain balanced random split of the training cohort
  uint64_t seed = 0;

  void validate() const {
    if (population < 2) throw ConfigError("evolution: population must be >= 2");
    if (generations < 1) throw ConfigError("evolution: generations must be >= 1");
    if (tournament < 1) throw ConfigError("evolution: tournament must be >= 1");
    if (crossover_rate < 0 || crossover_rate > 1 || mutation_rate < 0 || mutation_rate > 1)
      throw ConfigError("evolution: rates must lie in [0,1]");
    if (elitism < 0 || elitism >= population) throw ConfigError("evolution: elitism must be < population");
  }
};

// Mean inner-CV accuracy of a genome at the 0.5 decision threshold. Any fold
// whose training half is single-class, or any training failure, scores the
// genome 0 rather than aborting the search. The RNG stream is keyed by the
// genome string, so results do not depend on evaluation order.
inline double genome_fitness(const PipelineGenome& genome, const Dataset& train,
                             const Partition& inner, const std::string& target, uint64_t seed,
                             unsigned workers = 1, bool* failed = nullptr) {
  if (inner.assignment.size() != train.n_rows())
    throw ContractError("genome_fitness: inner partition must cover the training cohort only");
  if (failed) *failed = false;
  const uint64_t genome_seed = derive_seed(seed, fnv1a64(genome.canonical()));
  const size_t target_idx = train.schema().index_of(target);
  double total = 0.0;
  try {
    for (int fold = 0; fold < inner.k; ++fold) {
      const Dataset fold_train = train.subset(inner.complement_rows(fold));
      const auto y_train = fold_train.labels(fold_train.schema().index_of(target));
      bool single = true;
      for (size_t i = 1; i < y_train.size(); ++i) single &= y_train[i] == y_train[0];
      if (single || y_train.empty()) {
        if (failed) *failed = true;
        return 0.0;
      }
      const FittedPipeline p =
          fit_pipeline(genome, fold_train, target, derive_seed(genome_seed, static_cast<uint64_t>(fold)),
                       workers);
      const Dataset fold_val = train.subset(inner.cohort_rows(fold));
      const auto probs = p.predict_proba(fold_val);
      size_t correct = 0;
      for (size_t r = 0; r < fold_val.n_rows(); ++r) {
        const int pred = probs[r] >= 0.5 ? 1 : 0;
        correct += pred == (fold_val.value(target_idx, r) != 0.0 ? 1 : 0) ? 1 : 0;
      }
      total += static_cast<double>(correct) / static_cast<double>(fold_val.n_rows());
    }
  } catch (const std::exception&) {
    if (failed) *failed = true;
    return 0.0;
  }
  return total / static_cast<double>(inner.k);
}

struct EvolveResult {
  PipelineGenome best;
  double best_fitness = 0.0;
  std::vector<double> history;        // best-so-far after each generation (gen 0 = initial population)
  std::vector<std::string> failures;  // genome strings that scored 0 due to a training failure
  size_t evaluations = 0;             // distinct genomes evaluated
};

// Genetic search over the pipeline grammar: tournament selection, gene-wise
// crossover, single-gene mutation, elitism. Fitness values are cached by the
// genome's canonical string.
inline EvolveResult evolve(const Dataset& train, const Partition& inner, const Grammar& grammar,
                           const EvolutionParams& params, const std::string& target,
                           unsigned workers = 1) {
  params.validate();
  EvolveResult result;
  Rng rng(derive_seed(params.seed, 0xe701));
  std::map<std::string, double> cache;

  auto evaluate_all = [&](const std::vector<PipelineGenome>& pop) {
    std::vector<std::pair<std::string, const PipelineGenome*>> pending;
    for (const auto& g : pop) {
      const std::string key = g.canonical();
      if (!cache.count(key)) {
        cache[key] = -1.0;  // reserve
        pending.push_back({key, &g});
      }
    }
    std::vector<double> values(pending.size());
    std::vector<uint8_t> failed(pending.size(), 0);
    parallel_for(pending.size(), workers, [&](size_t i) {
      bool f = false;
      values[i] = genome_fitness(*pending[i].second, train, inner, target, params.seed, 1, &f);
      failed[i] = f ? 1 : 0;
    });
    for (size_t i = 0; i < pending.size(); ++i) {
      cache[pending[i].first] = values[i];
      if (failed[i]) result.failures.push_back(pending[i].first);
    }
    result.evaluations += pending.size();
  };

  std::vector<PipelineGenome> pop;
  {
    // seed with the all-default genome when the grammar admits it
    const PipelineGenome defaults{};
    if (grammar.contains(defaults)) pop.push_back(defaults);
  }
  while (pop.size() < static_cast<size_t>(params.population)) {
    PipelineGenome g = grammar.random(rng);
    for (int attempt = 0; attempt < 8; ++attempt) {
      bool dup = false;
      for (const auto& other : pop) dup |= other == g;
      if (!dup) break;
      g = grammar.random(rng);
    }
    pop.push_back(g);
  }
  evaluate_all(pop);

  auto fitness_of = [&](const PipelineGenome& g) { return cache.at(g.canonical()); };
  auto better = [&](const PipelineGenome& a, const PipelineGenome& b) {
    const double fa = fitness_of(a), fb = fitness_of(b);
    if (fa != fb) return fa > fb;
    return a.canonical() < b.canonical();  // deterministic tie-break
  };

  PipelineGenome best = pop[0];
  for (const auto& g : pop)
    if (better(g, best)) best = g;
  result.history.push_back(fitness_of(best));

  for (int gen = 1; gen <= params.generations; ++gen) {
    std::vector<PipelineGenome> sorted = pop;
    std::stable_sort(sorted.begin(), sorted.end(), better);
    std::vector<PipelineGenome> next(sorted.begin(),
                                     sorted.begin() + std::min<size_t>(static_cast<size_t>(params.elitism),
                                                                       sorted.size()));
    auto tournament = [&]() {
      PipelineGenome winner = pop[static_cast<size_t>(rng.below(pop.size()))];
      for (int i = 1; i < params.tournament; ++i) {
        const PipelineGenome cand = pop[static_cast<size_t>(rng.below(pop.size()))];
        if (better(cand, winner)) winner = cand;
      }
      return winner;
    };
    while (next.size() < static_cast<size_t>(params.population)) {
      PipelineGenome child = tournament();
      if (rng.bernoulli(params.crossover_rate)) child = grammar.crossover(child, tournament(), rng);
      if (rng.bernoulli(params.mutation_rate)) child = grammar.mutate(child, rng);
      next.push_back(child);
    }
    pop = std::move(next);
    evaluate_all(pop);
    for (const auto& g : pop)
      if (better(g, best)) best = g;
    result.history.push_back(fitness_of(best));
  }

  result.best = best;
  result.best_fitness = fitness_of(best);
  return result;
}

struct GridSearchResult {
  ModelSpec best;
  size_t best_index = 0;
  std::vector<double> accuracies;  // declared grid order
};

// Exhaustive refinement of the model genes; the returned cell maximizes mean
// inner-CV accuracy, ties resolved toward the first declared cell.
inline GridSearchResult grid_search(const PipelineGenome& base, const std::vector<ModelSpec>& grid,
                                    const Dataset& train, const Partition& inner,
                                    const std::string& target, uint64_t seed, unsigned workers = 1) {
  if (grid.empty()) throw ContractError("grid_search: empty grid");
  GridSearchResult result;
  result.accuracies.assign(grid.size(), 0.0);
  parallel_for(grid.size(), workers, [&](size_t i) {
    PipelineGenome g = base;
    g.model = grid[i];
    result.accuracies[i] = genome_fitness(g, train, inner, target, seed, 1);
  });
  size_t best = 0;
  for (size_t i = 1; i < grid.size(); ++i)
    if (result.accuracies[i] > result.accuracies[best]) best = i;
  result.best = grid[best];
  result.best_index = best;
  return result;
}

}  // namespace ponv
