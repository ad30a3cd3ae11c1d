#pragma once

// Exact offline tier selection.
//
// For disjoint candidate sets the optimum has threshold structure: tier 2 is
// the MNL-optimal profit prefix of X2 and tier 1 is the best profit prefix of
// X1 when tier 2's revenue acts as the outside option. Tiers themselves must
// be disjoint, so when X1 and X2 overlap a shared product has to be assigned
// to one side; the solver enumerates those assignments for the "contested"
// overlap products and solves each resulting disjoint problem by prefixes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <unordered_set>
#include <vector>

#include "smnl/catalog.hpp"
#include "smnl/choice_model.hpp"
#include "smnl/error.hpp"

namespace smnl {

inline constexpr double kEmptyTierThreshold = std::numeric_limits<double>::infinity();

struct SolveResult {
  TieredOffer offer;
  double expected_profit = 0.0;
  // Lowest profit on each tier; +inf for an empty tier.
  std::vector<double> thresholds;

  double theta1() const { return thresholds.size() > 0 ? thresholds[0] : kEmptyTierThreshold; }
  double theta2() const { return thresholds.size() > 1 ? thresholds[1] : kEmptyTierThreshold; }
};

// Two-tier problem over dense indices into `profit` / `weight`. `ids` is the
// tie-break key for equal profits (ascending); when empty the index is used.
struct TwoTierProblem {
  std::span<const double> profit;
  std::span<const double> weight;
  std::span<const ProductId> ids;
  std::vector<std::size_t> tier1;
  std::vector<std::size_t> tier2;
};

struct IndexedSolution {
  std::vector<std::size_t> tier1;
  std::vector<std::size_t> tier2;
  double value = 0.0;
};

struct SolveOptions {
  // Enumeration is 2^contested partitions of the shared candidates.
  std::size_t max_contested = 20;
};

namespace detail {

inline void sort_by_profit(std::vector<std::size_t>& items, std::span<const double> profit,
                           std::span<const ProductId> ids) {
  std::sort(items.begin(), items.end(), [&](std::size_t a, std::size_t b) {
    if (profit[a] != profit[b]) return profit[a] > profit[b];
    if (!ids.empty()) return ids[a] < ids[b];
    return a < b;
  });
}

struct PrefixChoice {
  std::size_t length = 0;
  double value = 0.0;
};

// MNL-optimal prefix of a profit-sorted list, via running sums.
inline PrefixChoice best_mnl_prefix(std::span<const std::size_t> sorted,
                                    std::span<const double> profit,
                                    std::span<const double> weight) {
  PrefixChoice best;
  double num = 0.0;
  double den = 1.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    num += profit[sorted[k]] * weight[sorted[k]];
    den += weight[sorted[k]];
    if (num / den > best.value) best = {k + 1, num / den};
  }
  return best;
}

// Best tier-1 prefix when a later tier contributes `outside` revenue per
// customer who declines tier 1.
inline PrefixChoice best_first_prefix(std::span<const std::size_t> sorted,
                                      std::span<const double> profit,
                                      std::span<const double> weight, double outside) {
  PrefixChoice best{0, outside};
  double num = outside;
  double den = 1.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    num += profit[sorted[k]] * weight[sorted[k]];
    den += weight[sorted[k]];
    if (num / den > best.value) best = {k + 1, num / den};
  }
  return best;
}

// Both candidate lists sorted and disjoint.
inline IndexedSolution solve_sorted_disjoint(std::span<const std::size_t> sorted1,
                                             std::span<const std::size_t> sorted2,
                                             std::span<const double> profit,
                                             std::span<const double> weight) {
  const PrefixChoice second = best_mnl_prefix(sorted2, profit, weight);
  const PrefixChoice first = best_first_prefix(sorted1, profit, weight, second.value);
  IndexedSolution sol;
  sol.tier1.assign(sorted1.begin(), sorted1.begin() + static_cast<std::ptrdiff_t>(first.length));
  sol.tier2.assign(sorted2.begin(), sorted2.begin() + static_cast<std::ptrdiff_t>(second.length));
  sol.value = first.value;
  return sol;
}

}  // namespace detail

// Every (tier-1 prefix, tier-2 prefix) pair of the profit-sorted candidate
// lists. A tier-2 prefix skips products already on tier 1. These offers are
// profit-ordered by tier; exact optima when X1 and X2 are disjoint.
inline std::vector<IndexedSolution> prefix_pair_offers(const TwoTierProblem& p) {
  auto s1 = p.tier1;
  auto s2 = p.tier2;
  detail::sort_by_profit(s1, p.profit, p.ids);
  detail::sort_by_profit(s2, p.profit, p.ids);
  std::vector<IndexedSolution> out;
  std::vector<char> on_tier1(p.profit.size(), 0);
  for (std::size_t k1 = 0; k1 <= s1.size(); ++k1) {
    if (k1 > 0) on_tier1[s1[k1 - 1]] = 1;
    std::vector<std::size_t> rest;
    for (std::size_t i : s2) {
      if (!on_tier1[i]) rest.push_back(i);
    }
    for (std::size_t k2 = 0; k2 <= rest.size(); ++k2) {
      IndexedSolution sol;
      sol.tier1.assign(s1.begin(), s1.begin() + static_cast<std::ptrdiff_t>(k1));
      sol.tier2.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(k2));
      const std::vector<std::size_t> tiers[2] = {sol.tier1, sol.tier2};
      sol.value = tiered_revenue(tiers, p.profit, p.weight);
      out.push_back(std::move(sol));
    }
  }
  return out;
}

// Best prefix pair in the sense of prefix_pair_offers, with incremental sums.
// A feasible solution; the exact optimum when the candidate sets are disjoint.
inline IndexedSolution best_prefix_pair(const TwoTierProblem& p) {
  auto s1 = p.tier1;
  auto s2 = p.tier2;
  detail::sort_by_profit(s1, p.profit, p.ids);
  detail::sort_by_profit(s2, p.profit, p.ids);
  std::vector<char> on_tier1(p.profit.size(), 0);
  IndexedSolution best;
  std::size_t best_k1 = 0;
  std::vector<std::size_t> best_rest;
  std::size_t best_k2 = 0;
  double num1 = 0.0;
  double den1 = 1.0;
  std::vector<std::size_t> rest;
  for (std::size_t k1 = 0; k1 <= s1.size(); ++k1) {
    if (k1 > 0) {
      const std::size_t i = s1[k1 - 1];
      on_tier1[i] = 1;
      num1 += p.profit[i] * p.weight[i];
      den1 += p.weight[i];
    }
    rest.clear();
    for (std::size_t i : s2) {
      if (!on_tier1[i]) rest.push_back(i);
    }
    double num2 = 0.0;
    double den2 = 1.0;
    for (std::size_t k2 = 0; k2 <= rest.size(); ++k2) {
      if (k2 > 0) {
        num2 += p.profit[rest[k2 - 1]] * p.weight[rest[k2 - 1]];
        den2 += p.weight[rest[k2 - 1]];
      }
      const double value = (num1 + num2 / den2) / den1;
      if (value > best.value) {
        best.value = value;
        best_k1 = k1;
        best_k2 = k2;
        best_rest = rest;
      }
    }
  }
  best.tier1.assign(s1.begin(), s1.begin() + static_cast<std::ptrdiff_t>(best_k1));
  best.tier2.assign(best_rest.begin(), best_rest.begin() + static_cast<std::ptrdiff_t>(best_k2));
  return best;
}

// Exact maximizer of the two-tier expected profit with disjoint tiers.
inline IndexedSolution solve_two_tier_indexed(const TwoTierProblem& p,
                                              const SolveOptions& options = {}) {
  const std::size_t n = p.profit.size();
  std::vector<char> in1(n, 0);
  std::vector<char> in2(n, 0);
  for (std::size_t i : p.tier1) in1[i] = 1;
  for (std::size_t i : p.tier2) in2[i] = 1;

  auto s1 = p.tier1;
  auto s2 = p.tier2;
  detail::sort_by_profit(s1, p.profit, p.ids);
  detail::sort_by_profit(s2, p.profit, p.ids);

  const bool overlap = std::any_of(s1.begin(), s1.end(), [&](std::size_t i) { return in2[i]; });
  if (!overlap) {
    IndexedSolution sol = detail::solve_sorted_disjoint(s1, s2, p.profit, p.weight);
    return sol;
  }

  // A tier-1 product at an optimum has profit >= the optimal value, so shared
  // products at or below a feasible value can stay tier-2 only.
  IndexedSolution best = best_prefix_pair(p);
  std::vector<std::size_t> contested;
  std::vector<int> slot(n, -1);
  for (std::size_t i : s1) {
    if (in2[i] && p.weight[i] > 0.0 && p.profit[i] > best.value) {
      slot[i] = static_cast<int>(contested.size());
      contested.push_back(i);
    }
  }
  if (contested.size() > options.max_contested) {
    throw InstanceTooLargeError("solve_two_tier: too many shared candidates to assign exactly",
                                static_cast<double>(contested.size()),
                                static_cast<double>(options.max_contested));
  }

  std::vector<std::size_t> x1;
  std::vector<std::size_t> x2;
  x1.reserve(s1.size());
  x2.reserve(s2.size());
  const std::uint64_t masks = std::uint64_t{1} << contested.size();
  for (std::uint64_t mask = 0; mask < masks; ++mask) {
    x1.clear();
    x2.clear();
    for (std::size_t i : s1) {
      if (!in2[i] || (slot[i] >= 0 && ((mask >> slot[i]) & 1U))) x1.push_back(i);
    }
    for (std::size_t i : s2) {
      if (!(slot[i] >= 0 && ((mask >> slot[i]) & 1U))) x2.push_back(i);
    }
    IndexedSolution sol = detail::solve_sorted_disjoint(x1, x2, p.profit, p.weight);
    if (sol.value > best.value) best = std::move(sol);
  }
  return best;
}

// Best tier 1 when tier 2 is frozen: MNL with tier 2's revenue as the outside
// option, over tier-1 candidates not excluded.
inline IndexedSolution best_first_tier_given(const TwoTierProblem& p,
                                             std::span<const std::size_t> frozen_tier2,
                                             std::span<const std::size_t> excluded = {}) {
  std::vector<char> blocked(p.profit.size(), 0);
  for (std::size_t i : frozen_tier2) blocked[i] = 1;
  for (std::size_t i : excluded) blocked[i] = 1;
  std::vector<std::size_t> s1;
  for (std::size_t i : p.tier1) {
    if (!blocked[i]) s1.push_back(i);
  }
  detail::sort_by_profit(s1, p.profit, p.ids);
  const std::vector<std::size_t> tier2(frozen_tier2.begin(), frozen_tier2.end());
  const std::vector<std::size_t> one[1] = {tier2};
  const double outside = tiered_revenue(one, p.profit, p.weight);
  const auto choice = detail::best_first_prefix(s1, p.profit, p.weight, outside);
  IndexedSolution sol;
  sol.tier1.assign(s1.begin(), s1.begin() + static_cast<std::ptrdiff_t>(choice.length));
  sol.tier2 = tier2;
  sol.value = choice.value;
  return sol;
}

namespace detail {

inline TwoTierProblem problem_from(const Catalog& catalog, std::span<const double> weights,
                                   const std::vector<ProductId>& ids) {
  TwoTierProblem p;
  p.profit = catalog.profits();
  p.weight = weights;
  p.ids = ids;
  for (ProductId id : catalog.candidates(0)) p.tier1.push_back(catalog.index_of(id));
  for (ProductId id : catalog.candidates(1)) p.tier2.push_back(catalog.index_of(id));
  return p;
}

inline std::vector<ProductId> catalog_ids(const Catalog& catalog) {
  std::vector<ProductId> ids;
  ids.reserve(catalog.size());
  for (const Product& p : catalog.products()) ids.push_back(p.id);
  return ids;
}

inline SolveResult to_result(const std::vector<std::vector<std::size_t>>& tiers,
                             const Catalog& catalog, std::span<const double> weights) {
  SolveResult r;
  r.offer.tiers.assign(tiers.size(), {});
  for (std::size_t k = 0; k < tiers.size(); ++k) {
    double threshold = kEmptyTierThreshold;
    for (std::size_t i : tiers[k]) {
      r.offer.tiers[k].push_back(catalog.products()[i].id);
      threshold = std::min(threshold, catalog.products()[i].profit);
    }
    r.thresholds.push_back(threshold);
  }
  r.expected_profit = tiered_revenue(tiers, catalog.profits(), weights);
  return r;
}

}  // namespace detail

inline SolveResult solve_two_tier(const Catalog& catalog, std::span<const double> weights,
                                  const SolveOptions& options = {}) {
  const auto ids = detail::catalog_ids(catalog);
  const TwoTierProblem p = detail::problem_from(catalog, weights, ids);
  const IndexedSolution sol = solve_two_tier_indexed(p, options);
  return detail::to_result({sol.tier1, sol.tier2}, catalog, weights);
}

inline SolveResult solve_two_tier(const Catalog& catalog, const SolveOptions& options = {}) {
  return solve_two_tier(catalog, catalog.valuations(), options);
}

// Upper bound on the number of assignments brute_force_optimal will enumerate.
inline constexpr double kBruteForceCap = 4194304.0;  // 2^22

// Exhaustive search over every assignment of candidates to {excluded, tier 1,
// ..., tier W}, honoring candidate membership and tier disjointness.
inline SolveResult brute_force_optimal(const Catalog& catalog, std::size_t num_tiers,
                                       std::span<const double> weights) {
  if (num_tiers == 0) throw ValidationError("num_tiers", "must be positive");
  if (num_tiers > catalog.num_candidate_tiers()) {
    throw ValidationError("num_tiers", "catalog defines only " +
                                           std::to_string(catalog.num_candidate_tiers()) +
                                           " candidate tiers");
  }
  // Per product: the tiers it may join.
  std::vector<std::size_t> items;
  std::vector<std::vector<std::size_t>> options;
  double assignments = 1.0;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    std::vector<std::size_t> allowed;
    for (std::size_t k = 0; k < num_tiers; ++k) {
      if (catalog.is_candidate_index(k, i)) allowed.push_back(k);
    }
    if (allowed.empty()) continue;
    assignments *= static_cast<double>(allowed.size() + 1);
    items.push_back(i);
    options.push_back(std::move(allowed));
  }
  if (assignments > kBruteForceCap) {
    throw InstanceTooLargeError("brute_force_optimal: assignment count", assignments,
                                kBruteForceCap);
  }

  std::vector<std::size_t> choice(items.size(), 0);  // 0 = excluded, else option index + 1
  std::vector<std::vector<std::size_t>> tiers(num_tiers);
  std::vector<std::vector<std::size_t>> best(num_tiers);
  double best_value = -1.0;
  while (true) {
    for (auto& t : tiers) t.clear();
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (choice[k] > 0) tiers[options[k][choice[k] - 1]].push_back(items[k]);
    }
    const double value = tiered_revenue(tiers, catalog.profits(), weights);
    if (value > best_value) {
      best_value = value;
      best = tiers;
    }
    std::size_t k = 0;
    while (k < items.size() && ++choice[k] > options[k].size()) {
      choice[k] = 0;
      ++k;
    }
    if (k == items.size()) break;
  }
  return detail::to_result(best, catalog, weights);
}

inline SolveResult brute_force_optimal(const Catalog& catalog, std::size_t num_tiers) {
  return brute_force_optimal(catalog, num_tiers, catalog.valuations());
}

// Definition of a profit-ordered set: every member's profit is at least every
// excluded candidate's. Vacuous for an empty or full tier.
inline bool is_profit_ordered_set(const std::vector<ProductId>& tier,
                                  const std::vector<ProductId>& candidate_set,
                                  const Catalog& catalog) {
  const std::unordered_set<ProductId> members(tier.begin(), tier.end());
  double lowest_in = kEmptyTierThreshold;
  for (ProductId id : tier) lowest_in = std::min(lowest_in, catalog.product(id).profit);
  for (ProductId id : candidate_set) {
    if (!members.count(id) && catalog.product(id).profit > lowest_in) return false;
  }
  return true;
}

// Candidates of tier k that are still available once the other tiers are
// placed (tiers are disjoint).
inline std::vector<ProductId> available_candidates(const TieredOffer& offer, std::size_t tier,
                                                   const Catalog& catalog) {
  std::vector<ProductId> out;
  for (ProductId id : catalog.candidates(tier)) {
    const std::size_t placed = offer.tier_of(id);
    if (placed == 0 || placed == tier + 1) out.push_back(id);
  }
  return out;
}

// No tier-1 product may earn less than a tier-2 candidate left off the offer.
inline bool is_profit_ordered_by_tier(const TieredOffer& offer, const Catalog& catalog) {
  double lowest_tier1 = kEmptyTierThreshold;
  for (ProductId id : offer.tier(0)) lowest_tier1 = std::min(lowest_tier1, catalog.product(id).profit);
  for (ProductId id : catalog.candidates(1)) {
    if (offer.contains(id)) continue;
    if (catalog.product(id).profit > lowest_tier1) return false;
  }
  return true;
}

// Both tiers profit-ordered within their available candidates, and the offer
// profit-ordered by tier.
inline bool has_threshold_structure(const TieredOffer& offer, const Catalog& catalog) {
  for (std::size_t k = 0; k < 2; ++k) {
    if (!is_profit_ordered_set(offer.tier(k), available_candidates(offer, k, catalog), catalog)) {
      return false;
    }
  }
  return is_profit_ordered_by_tier(offer, catalog);
}

// Expected profit of every tier suffix (S_j, ..., S_W), j = 1..W.
inline std::vector<double> suffix_revenues(const TieredOffer& offer, const Catalog& catalog) {
  std::vector<double> out;
  for (std::size_t j = 0; j < offer.num_tiers(); ++j) {
    TieredOffer suffix(std::vector<std::vector<ProductId>>(offer.tiers.begin() + static_cast<std::ptrdiff_t>(j),
                                                           offer.tiers.end()));
    out.push_back(expected_profit(suffix, catalog));
  }
  return out;
}

struct Placement {
  bool excluded = false;
  std::size_t earliest_tier = 1;  // 1-based; meaningful when !excluded
};

// Where a new product with profit `profit` may land in the re-solved optimum,
// given the suffix revenues s_1 >= ... >= s_W of the current optimum. Equality
// with a suffix revenue counts as admissible.
inline Placement new_product_tier_prediction(std::span<const double> suffix, double profit) {
  if (suffix.empty()) return {};
  if (profit < suffix.back()) return {true, 0};
  for (std::size_t j = 0; j < suffix.size(); ++j) {
    if (profit >= suffix[j]) return {false, j + 1};
  }
  return {false, suffix.size()};
}

}  // namespace smnl
