#pragma once

// Sequential MNL: a customer runs an MNL choice over tier 1 plus the
// no-purchase option; only on a tier-1 no-purchase do they look at tier 2,
// and so on. All functions here are pure.

#include <cstddef>
#include <span>
#include <vector>

#include "smnl/catalog.hpp"
#include "smnl/random.hpp"

namespace smnl {

struct ChoiceDistribution {
  struct Entry {
    ProductId id;
    std::size_t tier;  // 1-based
    double probability;
  };

  std::vector<Entry> entries;            // offered products, in offer order
  double no_purchase = 1.0;              // p0(S)
  std::vector<double> tier_no_purchase;  // 1 / (1 + sum of tier weights), per tier

  double probability(ProductId id) const {
    for (const Entry& e : entries) {
      if (e.id == id) return e.probability;
    }
    return 0.0;
  }

  double total() const {
    double sum = no_purchase;
    for (const Entry& e : entries) sum += e.probability;
    return sum;
  }
};

// Expected profit of tiers given as catalog indices, for arbitrary weights.
// Telescoping product of per-tier no-purchase terms; works for any tier count.
inline double tiered_revenue(std::span<const std::vector<std::size_t>> tiers,
                             std::span<const double> profit, std::span<const double> weight) {
  double revenue = 0.0;
  double reach = 1.0;
  for (const auto& tier : tiers) {
    double num = 0.0;
    double den = 1.0;
    for (std::size_t i : tier) {
      num += profit[i] * weight[i];
      den += weight[i];
    }
    revenue += reach * num / den;
    reach /= den;
  }
  return revenue;
}

inline std::vector<std::vector<std::size_t>> to_indices(const TieredOffer& offer,
                                                        const Catalog& catalog) {
  std::vector<std::vector<std::size_t>> out(offer.tiers.size());
  for (std::size_t k = 0; k < offer.tiers.size(); ++k) {
    out[k].reserve(offer.tiers[k].size());
    for (ProductId id : offer.tiers[k]) out[k].push_back(catalog.index_of(id));
  }
  return out;
}

// `weights` is aligned with catalog.products(); it replaces the true
// valuations (e.g. with UCB estimates).
inline ChoiceDistribution purchase_probabilities(const TieredOffer& offer, const Catalog& catalog,
                                                 std::span<const double> weights) {
  validate_offer(offer, catalog);
  ChoiceDistribution dist;
  double reach = 1.0;
  for (std::size_t k = 0; k < offer.tiers.size(); ++k) {
    double den = 1.0;
    for (ProductId id : offer.tiers[k]) den += weights[catalog.index_of(id)];
    for (ProductId id : offer.tiers[k]) {
      dist.entries.push_back({id, k + 1, reach * weights[catalog.index_of(id)] / den});
    }
    dist.tier_no_purchase.push_back(1.0 / den);
    reach /= den;
  }
  dist.no_purchase = reach;
  return dist;
}

inline ChoiceDistribution purchase_probabilities(const TieredOffer& offer, const Catalog& catalog) {
  return purchase_probabilities(offer, catalog, catalog.valuations());
}

inline double expected_profit(const TieredOffer& offer, const Catalog& catalog,
                              std::span<const double> weights) {
  validate_offer(offer, catalog);
  const auto tiers = to_indices(offer, catalog);
  return tiered_revenue(tiers, catalog.profits(), weights);
}

inline double expected_profit(const TieredOffer& offer, const Catalog& catalog) {
  return expected_profit(offer, catalog, catalog.valuations());
}

// Plain MNL revenue of one set.
inline double expected_profit_single_tier(const std::vector<ProductId>& tier,
                                          const Catalog& catalog) {
  return expected_profit(TieredOffer(tier, {}), catalog);
}

// Position of a sampled purchase: tier is 1-based (0 = no purchase) and
// slot indexes into that tier.
struct IndexedChoice {
  std::size_t tier = 0;
  std::size_t slot = 0;
};

// Sequential sampler over pre-indexed tiers; no validation. One uniform draw
// per tier visited.
template <std::uniform_random_bit_generator G>
IndexedChoice sample_indexed(std::span<const std::vector<std::size_t>> tiers,
                             std::span<const double> weight, G& gen) {
  for (std::size_t k = 0; k < tiers.size(); ++k) {
    double den = 1.0;
    for (std::size_t i : tiers[k]) den += weight[i];
    const double u = uniform01(gen) * den;
    double acc = 0.0;
    for (std::size_t s = 0; s < tiers[k].size(); ++s) {
      acc += weight[tiers[k][s]];
      if (u < acc) return {k + 1, s};
    }
  }
  return {};
}

inline ChoiceOutcome to_outcome(const TieredOffer& offer, IndexedChoice c) {
  if (c.tier == 1) return ChoiceOutcome::tier1(offer.tier(0)[c.slot]);
  if (c.tier == 2) return ChoiceOutcome::tier2(offer.tier(1)[c.slot]);
  return ChoiceOutcome::none();
}

// Draws one customer's response to a (at most two-tier) offer.
template <std::uniform_random_bit_generator G>
ChoiceOutcome sample_choice(const TieredOffer& offer, const Catalog& catalog, G& gen) {
  if (offer.num_tiers() > 2) {
    throw ValidationError("offer", "sampling supports at most two tiers");
  }
  validate_offer(offer, catalog);
  const auto tiers = to_indices(offer, catalog);
  return to_outcome(offer, sample_indexed(tiers, catalog.valuations(), gen));
}

inline double realized_profit(const ChoiceOutcome& outcome, const Catalog& catalog) {
  return outcome.purchased() ? catalog.product(outcome.product).profit : 0.0;
}

}  // namespace smnl
