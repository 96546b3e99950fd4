// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>

#include "helpers.hpp"
#include "ponv/splitter.hpp"

using namespace ponv;
using ponv::testing::make_dataset;
using ponv::testing::tiny_schema;

namespace {

Dataset people(const std::vector<std::pair<double, int>>& age_sex) {
  const FeatureSchema s = tiny_schema();
  std::vector<std::vector<double>> rows;
  for (auto [age, female] : age_sex)
    rows.push_back({age, double(female), 0, 0, 0, 60, 0, 0, 0, 0, 0});
  return make_dataset(s, rows);
}

// independent recomputation of the objective: histogram-and-sum from scratch
double oracle_objective(const Dataset& d, const std::vector<int>& assignment, int k) {
  const size_t age_i = d.schema().index_of("AGE");
  const size_t sex_i = d.schema().index_of("GENDER");
  std::vector<std::map<std::pair<long, long>, double>> hist(static_cast<size_t>(k));
  std::vector<double> sizes(static_cast<size_t>(k), 0.0);
  for (size_t r = 0; r < d.n_rows(); ++r) {
    std::pair<long, long> cell;
    if (d.is_missing(age_i, r) || d.is_missing(sex_i, r)) {
      cell = {-1, -1};
    } else {
      long bin = long(std::floor((d.value(age_i, r) - 18.0) / 10.0));
      bin = std::clamp(bin, 0L, 8L);
      cell = {bin, long(d.value(sex_i, r) != 0.0)};
    }
    hist[size_t(assignment[r])][cell] += 1.0;
    sizes[size_t(assignment[r])] += 1.0;
  }
  double total = 0;
  size_t pairs = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      std::map<std::pair<long, long>, double> keys = hist[size_t(i)];
      for (auto& [c, v] : hist[size_t(j)]) keys[c] += 0;  // union of support
      double dist = 0;
      for (auto& [c, _] : keys) {
        const double a = hist[size_t(i)].count(c) ? hist[size_t(i)][c] / sizes[size_t(i)] : 0.0;
        const double b = hist[size_t(j)].count(c) ? hist[size_t(j)][c] / sizes[size_t(j)] : 0.0;
        dist += std::fabs(a - b);
      }
      total += dist;
      ++pairs;
    }
  return total / double(pairs);
}

}  // namespace

TEST_CASE("age_sex_cell: binning and the missing cell", "[splitter]") {
  REQUIRE(age_sex_cell(18, false, 0, false) == 0);
  REQUIRE(age_sex_cell(18, false, 1, false) == 1);
  REQUIRE(age_sex_cell(27.9, false, 0, false) == 0);
  REQUIRE(age_sex_cell(28, false, 0, false) == 2);
  REQUIRE(age_sex_cell(97.9, false, 1, false) == 15);
  REQUIRE(age_sex_cell(98, false, 0, false) == 16);   // open-ended top bin
  REQUIRE(age_sex_cell(120, false, 1, false) == 17);
  REQUIRE(age_sex_cell(40, true, 1, false) == kMissingCell);
  REQUIRE(age_sex_cell(40, false, 1, true) == kMissingCell);
}

TEST_CASE("random_partition: exact division", "[splitter]") {
  const Dataset d = people({{20, 0}, {25, 1}, {30, 0}, {35, 1}, {40, 0},
                            {45, 1}, {50, 0}, {55, 1}, {60, 0}, {65, 1}});
  const Partition p = random_partition(d, 5, 1);
  for (size_t sz : p.sizes) REQUIRE(sz == 2);
}

TEST_CASE("random_partition: remainder spread as sizes {3,2,2,2,2}", "[splitter]") {
  std::vector<std::pair<double, int>> recs;
  for (int i = 0; i < 11; ++i) recs.push_back({20.0 + i, i % 2});
  const Dataset d = people(recs);
  const Partition p = random_partition(d, 5, 123);
  std::vector<size_t> sizes = p.sizes;
  std::sort(sizes.begin(), sizes.end());
  REQUIRE(sizes == std::vector<size_t>{2, 2, 2, 2, 3});
}

TEST_CASE("random_partition: deterministic per seed", "[splitter]") {
  std::vector<std::pair<double, int>> recs;
  for (int i = 0; i < 37; ++i) recs.push_back({20.0 + i, i % 2});
  const Dataset d = people(recs);
  REQUIRE(random_partition(d, 5, 9).assignment == random_partition(d, 5, 9).assignment);
  REQUIRE(random_partition(d, 5, 9).assignment != random_partition(d, 5, 10).assignment);
}

TEST_CASE("cohort_distance: identical cohort distributions give 0", "[splitter]") {
  // two cohorts, each one 20-ish male and one 40-ish female
  const Dataset d = people({{20, 0}, {45, 1}, {22, 0}, {41, 1}});
  const Partition p = Partition::build(d, 2, {0, 0, 1, 1});
  REQUIRE(cohort_distance(p, d) == 0.0);
}

TEST_CASE("cohort_distance: disjoint support is maximal (2.0)", "[splitter]") {
  const Dataset d = people({{20, 0}, {21, 0}, {20, 1}, {21, 1}});
  const Partition p = Partition::build(d, 2, {0, 0, 1, 1});  // all-male vs all-female
  REQUIRE(cohort_distance(p, d) == 2.0);
}

TEST_CASE("cohort_distance: matches the histogram-and-sum oracle", "[splitter][oracle]") {
  std::vector<std::pair<double, int>> recs = {{19, 0}, {23, 1}, {31, 0}, {33, 1}, {45, 0}, {52, 1},
                                              {61, 0}, {64, 1}, {72, 0}, {80, 1}, {95, 0}, {99, 1}};
  const Dataset d = people(recs);
  const std::vector<int> assignment = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
  const Partition p = Partition::build(d, 3, assignment);
  REQUIRE(std::fabs(cohort_distance(p, d) - oracle_objective(d, assignment, 3)) <= 1e-12);
}

TEST_CASE("partition: invariants enforced", "[splitter]") {
  const Dataset d = people({{20, 0}, {25, 1}, {30, 0}, {35, 1}});
  REQUIRE_THROWS_AS(Partition::build(d, 2, {0, 0, 0, 1}), ContractError);  // imbalance > 1
  REQUIRE_THROWS_AS(Partition::build(d, 2, {0, 0, 2, 1}), ContractError);  // label out of range
  REQUIRE_THROWS_AS(Partition::build(d, 2, {0, 1}), ContractError);        // wrong length
}

TEST_CASE("partition: cached histograms equal recomputation", "[splitter][property]") {
  SynthConfig cfg;
  cfg.n = 257;
  cfg.missing_rate = 0.05;
  const Dataset d = synth_generate(cfg, 6);
  const Partition p = random_partition(d, 5, 3);
  const auto cells = record_cells(d);
  std::vector<std::array<size_t, kHistogramCells>> fresh(5, std::array<size_t, kHistogramCells>{});
  for (size_t r = 0; r < d.n_rows(); ++r) ++fresh[size_t(p.assignment[r])][cells[r]];
  REQUIRE(fresh == p.counts);
}

TEST_CASE("dbc: symmetric optimum reached exactly", "[splitter]") {
  // 4 male + 4 female, identical ages: 2M+2F per cohort is reachable and optimal
  const Dataset d = people({{30, 0}, {30, 0}, {30, 0}, {30, 0}, {30, 1}, {30, 1}, {30, 1}, {30, 1}});
  BeeColonyParams params;
  params.seed = 5;
  params.max_iterations = 200;
  const DbcResult res = dbc_optimize(d, 2, params);
  REQUIRE(res.objective == 0.0);
  REQUIRE(res.objective <= res.initial_objective);
}

TEST_CASE("dbc: deterministic per seed and monotone best-so-far", "[splitter]") {
  SynthConfig cfg;
  cfg.n = 300;
  const Dataset d = synth_generate(cfg, 15);
  BeeColonyParams params;
  params.seed = 11;
  params.max_iterations = 60;
  const DbcResult a = dbc_optimize(d, 4, params);
  const DbcResult b = dbc_optimize(d, 4, params);
  REQUIRE(a.partition.assignment == b.partition.assignment);
  REQUIRE(a.objective == b.objective);
  for (size_t i = 1; i < a.trace.size(); ++i) REQUIRE(a.trace[i] <= a.trace[i - 1]);
  REQUIRE(a.objective <= a.initial_objective);
}

TEST_CASE("dbc: objective invariant under cohort relabeling", "[splitter][property]") {
  SynthConfig cfg;
  cfg.n = 120;
  const Dataset d = synth_generate(cfg, 33);
  const Partition p = random_partition(d, 3, 4);
  std::vector<int> relabeled = p.assignment;
  for (int& c : relabeled) c = (c + 1) % 3;
  const Partition q = Partition::build(d, 3, relabeled);
  REQUIRE(std::fabs(cohort_distance(p, d) - cohort_distance(q, d)) <= 1e-15);
}

TEST_CASE("dbc: swapping records of identical cell leaves the objective unchanged",
          "[splitter][property]") {
  const Dataset d = people({{20, 0}, {21, 0}, {40, 1}, {41, 1}, {60, 0}, {61, 0}});
  const Partition p = Partition::build(d, 2, {0, 1, 0, 1, 0, 1});
  // records 0 and 1 share (age-bin, sex); swap their cohorts
  const Partition q = Partition::build(d, 2, {1, 0, 0, 1, 0, 1});
  REQUIRE(cohort_distance(p, d) == cohort_distance(q, d));
}

TEST_CASE("dbc: within 5% of the brute-force optimum on n=10, k=2", "[splitter][oracle]") {
  const Dataset d = people({{19, 0}, {25, 1}, {33, 0}, {37, 1}, {48, 0},
                            {55, 1}, {62, 0}, {71, 1}, {83, 0}, {99, 1}});
  // enumerate all balanced bipartitions: choose 5 of 10 for cohort 0
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << 10); ++mask) {
    if (__builtin_popcount(unsigned(mask)) != 5) continue;
    std::vector<int> assignment(10);
    for (int i = 0; i < 10; ++i) assignment[size_t(i)] = (mask >> i) & 1;
    best = std::min(best, oracle_objective(d, assignment, 2));
  }
  BeeColonyParams params;
  params.seed = 2;
  params.max_iterations = 300;
  const DbcResult res = dbc_optimize(d, 2, params);
  REQUIRE(res.objective <= best * 1.05 + 1e-12);
}

TEST_CASE("dbc: time budget returns best-so-far with a flag", "[splitter]") {
  SynthConfig cfg;
  cfg.n = 20000;
  cfg.informative = 1;
  cfg.noise = 0;
  const Dataset d = synth_generate(cfg, 1);
  BeeColonyParams params;
  params.seed = 3;
  params.colony = 50;
  params.max_iterations = 1000000;
  params.time_budget_ms = 1;
  const DbcResult res = dbc_optimize(d, 5, params);
  REQUIRE(res.timed_out);
  res.partition.check_balance();
  REQUIRE(res.partition.assignment.size() == d.n_rows());
}

TEST_CASE("dbc: parameter validation", "[splitter]") {
  SynthConfig cfg;
  cfg.n = 20;
  const Dataset d = synth_generate(cfg, 1);
  BeeColonyParams params;
  params.colony = 0;
  REQUIRE_THROWS_AS(dbc_optimize(d, 2, params), ConfigError);
  BeeColonyParams ok;
  REQUIRE_THROWS_AS(dbc_optimize(d, 1, ok), ContractError);
}
