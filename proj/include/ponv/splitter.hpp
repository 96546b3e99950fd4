// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ponv/dataset.hpp"
#include "ponv/rng.hpp"

namespace ponv {

// Joint (age-bin x sex) histogram cells: 10-year age bins from 18 to 98, the
// last bin open-ended, times two sexes, plus one cell for records with AGE or
// GENDER missing.
inline constexpr size_t kAgeBins = 9;
inline constexpr size_t kHistogramCells = kAgeBins * 2 + 1;
inline constexpr size_t kMissingCell = kHistogramCells - 1;

inline size_t age_sex_cell(double age, bool age_missing, double sex, bool sex_missing) {
  if (age_missing || sex_missing) return kMissingCell;
  long bin = static_cast<long>(std::floor((age - 18.0) / 10.0));
  if (bin < 0) bin = 0;
  if (bin >= static_cast<long>(kAgeBins)) bin = kAgeBins - 1;
  return static_cast<size_t>(bin) * 2 + (sex != 0.0 ? 1 : 0);
}

// Precomputed cell per record. Datasets without AGE or GENDER columns place
// every record in the missing cell, which keeps partitions valid (the
// objective is then vacuous).
inline std::vector<uint16_t> record_cells(const Dataset& d) {
  const auto age_idx = d.schema().find("AGE");
  const auto sex_idx = d.schema().find("GENDER");
  std::vector<uint16_t> cells(d.n_rows(), static_cast<uint16_t>(kMissingCell));
  if (!age_idx || !sex_idx) return cells;
  for (size_t r = 0; r < d.n_rows(); ++r)
    cells[r] = static_cast<uint16_t>(age_sex_cell(d.value(*age_idx, r), d.is_missing(*age_idx, r),
                                                  d.value(*sex_idx, r), d.is_missing(*sex_idx, r)));
  return cells;
}

// Assignment of every record to one of k cohorts, sizes balanced to within
// one record, with per-cohort cell counts cached.
struct Partition {
  int k = 0;
  std::vector<int> assignment;
  std::vector<size_t> sizes;
  std::vector<std::array<size_t, kHistogramCells>> counts;

  static Partition build(const Dataset& d, int k, std::vector<int> assignment) {
    if (k < 1) throw ContractError("partition: k must be >= 1");
    if (assignment.size() != d.n_rows()) throw ContractError("partition: assignment size mismatch");
    Partition p;
    p.k = k;
    p.assignment = std::move(assignment);
    p.sizes.assign(static_cast<size_t>(k), 0);
    p.counts.assign(static_cast<size_t>(k), {});
    const auto cells = record_cells(d);
    for (size_t r = 0; r < p.assignment.size(); ++r) {
      const int c = p.assignment[r];
      if (c < 0 || c >= k) throw ContractError("partition: cohort index out of range");
      ++p.sizes[static_cast<size_t>(c)];
      ++p.counts[static_cast<size_t>(c)][cells[r]];
    }
    p.check_balance();
    return p;
  }

  void check_balance() const {
    size_t mn = SIZE_MAX, mx = 0;
    for (size_t s : sizes) {
      mn = std::min(mn, s);
      mx = std::max(mx, s);
    }
    if (mx - mn > 1) throw ContractError("partition: cohort sizes differ by more than one");
  }

  std::vector<size_t> cohort_rows(int cohort) const {
    std::vector<size_t> rows;
    for (size_t r = 0; r < assignment.size(); ++r)
      if (assignment[r] == cohort) rows.push_back(r);
    return rows;
  }

  std::vector<size_t> complement_rows(int cohort) const {
    std::vector<size_t> rows;
    for (size_t r = 0; r < assignment.size(); ++r)
      if (assignment[r] != cohort) rows.push_back(r);
    return rows;
  }
};

namespace detail {

inline double l1_between(const std::array<size_t, kHistogramCells>& a, size_t na,
                         const std::array<size_t, kHistogramCells>& b, size_t nb) {
  double dist = 0.0;
  for (size_t c = 0; c < kHistogramCells; ++c)
    dist += std::fabs(static_cast<double>(a[c]) / static_cast<double>(na) -
                      static_cast<double>(b[c]) / static_cast<double>(nb));
  return dist;
}

inline double objective_from_counts(const std::vector<std::array<size_t, kHistogramCells>>& counts,
                                    const std::vector<size_t>& sizes) {
  const size_t k = counts.size();
  double total = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < k; ++i)
    for (size_t j = i + 1; j < k; ++j) {
      total += l1_between(counts[i], sizes[i], counts[j], sizes[j]);
      ++pairs;
    }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

}  // namespace detail

// Mean over unordered cohort pairs of the L1 distance between normalized
// joint (age-bin x sex) histograms. 0 iff all cohort distributions agree;
// 2 is the maximum (disjoint support).
inline double cohort_distance(const Partition& p, const Dataset& d) {
  if (p.assignment.size() != d.n_rows()) throw ContractError("cohort_distance: partition/dataset mismatch");
  for (size_t s : p.sizes)
    if (s == 0) throw ContractError("cohort_distance: empty cohort");
  return detail::objective_from_counts(p.counts, p.sizes);
}

// Uniformly random size-balanced assignment, deterministic per seed.
inline Partition random_partition(const Dataset& d, int k, uint64_t seed) {
  if (k < 2) throw ContractError("random_partition: k must be >= 2");
  if (d.n_rows() < static_cast<size_t>(k)) throw ContractError("random_partition: fewer records than cohorts");
  Rng rng(seed);
  const size_t n = d.n_rows();
  std::vector<int> cohort_order(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) cohort_order[static_cast<size_t>(c)] = c;
  rng.shuffle(cohort_order);  // which cohorts take the remainder
  std::vector<int> labels;
  labels.reserve(n);
  const size_t base = n / static_cast<size_t>(k), extra = n % static_cast<size_t>(k);
  for (size_t i = 0; i < cohort_order.size(); ++i) {
    const size_t sz = base + (i < extra ? 1 : 0);
    labels.insert(labels.end(), sz, cohort_order[i]);
  }
  rng.shuffle(labels);
  return Partition::build(d, k, std::move(labels));
}

struct BeeColonyParams {
  int colony = 20;             // employed sites
  int scouts = 4;              // abandonment resets per iteration
  int neighborhood = 10;       // swap attempts per visit (the directed best-of-m move)
  double onlooker_exponent = 2.0;
  int abandonment = 15;        // stagnant visits before a site is abandoned
  int max_iterations = 500;
  uint64_t seed = 0;
  int64_t time_budget_ms = 0;  // 0 = unlimited

  void validate() const {
    if (colony < 1 || scouts < 1 || neighborhood < 1 || abandonment < 1 || max_iterations < 1)
      throw ConfigError("bee colony: all counts must be >= 1");
  }
};

struct DbcResult {
  Partition partition;
  double objective = 0.0;
  double initial_objective = 0.0;  // objective of the first scouted random partition
  size_t iterations = 0;
  bool timed_out = false;
  std::vector<double> trace;  // best-so-far per iteration, non-increasing
};

namespace detail {

struct BeeSite {
  std::vector<int> assignment;
  std::vector<std::array<size_t, kHistogramCells>> counts;
  std::vector<size_t> sizes;
  double objective = 0.0;
  int stagnation = 0;
  Rng rng{0};
};

inline void scout_site(BeeSite& site, const std::vector<uint16_t>& cells, size_t n, int k) {
  std::vector<int> labels;
  labels.reserve(n);
  std::vector<int> cohort_order(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) cohort_order[static_cast<size_t>(c)] = c;
  site.rng.shuffle(cohort_order);
  const size_t base = n / static_cast<size_t>(k), extra = n % static_cast<size_t>(k);
  for (size_t i = 0; i < cohort_order.size(); ++i)
    labels.insert(labels.end(), base + (i < extra ? 1 : 0), cohort_order[i]);
  site.rng.shuffle(labels);
  site.assignment = std::move(labels);
  site.sizes.assign(static_cast<size_t>(k), 0);
  site.counts.assign(static_cast<size_t>(k), {});
  for (size_t r = 0; r < n; ++r) {
    ++site.sizes[static_cast<size_t>(site.assignment[r])];
    ++site.counts[static_cast<size_t>(site.assignment[r])][cells[r]];
  }
  site.objective = objective_from_counts(site.counts, site.sizes);
  site.stagnation = 0;
}

// Best-of-m swap neighborhood; applies the best strictly improving swap.
// The swap move exchanges the cohorts of two records, so sizes are invariant.
inline bool directed_local_move(BeeSite& site, const std::vector<uint16_t>& cells, int m) {
  const size_t n = site.assignment.size();
  double best_obj = site.objective;
  size_t best_a = 0, best_b = 0;
  bool found = false;
  for (int attempt = 0; attempt < m; ++attempt) {
    const size_t a = static_cast<size_t>(site.rng.below(n));
    const size_t b = static_cast<size_t>(site.rng.below(n));
    const int ca = site.assignment[a], cb = site.assignment[b];
    if (ca == cb) continue;
    const uint16_t cell_a = cells[a], cell_b = cells[b];
    if (cell_a == cell_b) continue;  // objective provably unchanged
    // apply, evaluate, revert
    --site.counts[static_cast<size_t>(ca)][cell_a];
    ++site.counts[static_cast<size_t>(ca)][cell_b];
    --site.counts[static_cast<size_t>(cb)][cell_b];
    ++site.counts[static_cast<size_t>(cb)][cell_a];
    const double obj = objective_from_counts(site.counts, site.sizes);
    ++site.counts[static_cast<size_t>(ca)][cell_a];
    --site.counts[static_cast<size_t>(ca)][cell_b];
    ++site.counts[static_cast<size_t>(cb)][cell_b];
    --site.counts[static_cast<size_t>(cb)][cell_a];
    if (obj < best_obj) {
      best_obj = obj;
      best_a = a;
      best_b = b;
      found = true;
    }
  }
  if (!found) return false;
  const int ca = site.assignment[best_a], cb = site.assignment[best_b];
  --site.counts[static_cast<size_t>(ca)][cells[best_a]];
  ++site.counts[static_cast<size_t>(ca)][cells[best_b]];
  --site.counts[static_cast<size_t>(cb)][cells[best_b]];
  ++site.counts[static_cast<size_t>(cb)][cells[best_a]];
  std::swap(site.assignment[best_a], site.assignment[best_b]);
  site.objective = best_obj;
  return true;
}

}  // namespace detail

// Directed Bee Colony optimization of the cohort-distance objective. Scouts
// seed random balanced partitions; employed bees run a directed (best-of-m)
// swap search per site; onlookers reinforce promising sites proportional to
// (1/(1+objective))^exponent; stagnant sites are abandoned and re-scouted.
// Per-site RNG streams keep the result deterministic for a fixed seed.
inline DbcResult dbc_optimize(const Dataset& d, int k, const BeeColonyParams& params) {
  params.validate();
  if (k < 2) throw ContractError("dbc_optimize: k must be >= 2");
  if (d.n_rows() < static_cast<size_t>(k)) throw ContractError("dbc_optimize: fewer records than cohorts");

  const auto start = std::chrono::steady_clock::now();
  const auto cells = record_cells(d);
  const size_t n = d.n_rows();
  const size_t colony = static_cast<size_t>(params.colony);

  std::vector<detail::BeeSite> sites(colony);
  for (size_t s = 0; s < colony; ++s) {
    sites[s].rng = Rng(derive_seed(params.seed, s));
    detail::scout_site(sites[s], cells, n, k);
  }

  DbcResult result;
  result.initial_objective = sites[0].objective;
  std::vector<int> best_assignment = sites[0].assignment;
  double best_obj = sites[0].objective;
  for (const auto& s : sites)
    if (s.objective < best_obj) {
      best_obj = s.objective;
      best_assignment = s.assignment;
    }

  size_t it = 0;
  for (; it < static_cast<size_t>(params.max_iterations); ++it) {
    if (params.time_budget_ms > 0) {
      const auto elapsed =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      if (elapsed.count() >= params.time_budget_ms) {
        result.timed_out = true;
        break;
      }
    }

    // employed phase
    for (auto& site : sites) {
      if (detail::directed_local_move(site, cells, params.neighborhood))
        site.stagnation = 0;
      else
        ++site.stagnation;
    }

    // onlooker phase: largest-remainder allocation of `colony` onlookers
    std::vector<double> weight(colony);
    double wsum = 0.0;
    for (size_t s = 0; s < colony; ++s) {
      weight[s] = std::pow(1.0 / (1.0 + sites[s].objective), params.onlooker_exponent);
      wsum += weight[s];
    }
    if (wsum > 0) {
      std::vector<size_t> alloc(colony, 0);
      std::vector<std::pair<double, size_t>> remainder(colony);
      size_t assigned = 0;
      for (size_t s = 0; s < colony; ++s) {
        const double share = static_cast<double>(colony) * weight[s] / wsum;
        alloc[s] = static_cast<size_t>(std::floor(share));
        assigned += alloc[s];
        remainder[s] = {share - std::floor(share), s};
      }
      std::stable_sort(remainder.begin(), remainder.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (size_t i = 0; assigned < colony && i < remainder.size(); ++i, ++assigned)
        ++alloc[remainder[i].second];
      for (size_t s = 0; s < colony; ++s)
        for (size_t v = 0; v < alloc[s]; ++v)
          if (detail::directed_local_move(sites[s], cells, params.neighborhood)) sites[s].stagnation = 0;
    }

    for (const auto& site : sites)
      if (site.objective < best_obj) {
        best_obj = site.objective;
        best_assignment = site.assignment;
      }

    // abandonment: re-scout the most stagnant sites, at most `scouts` per iteration
    std::vector<size_t> stagnant;
    for (size_t s = 0; s < colony; ++s)
      if (sites[s].stagnation > params.abandonment) stagnant.push_back(s);
    std::stable_sort(stagnant.begin(), stagnant.end(), [&](size_t a, size_t b) {
      return sites[a].stagnation > sites[b].stagnation;
    });
    for (size_t i = 0; i < stagnant.size() && i < static_cast<size_t>(params.scouts); ++i)
      detail::scout_site(sites[stagnant[i]], cells, n, k);

    result.trace.push_back(best_obj);
    if (best_obj == 0.0) {
      ++it;
      break;
    }
  }

  result.iterations = it;
  result.objective = best_obj;
  result.partition = Partition::build(d, k, std::move(best_assignment));
  return result;
}

}  // namespace ponv
