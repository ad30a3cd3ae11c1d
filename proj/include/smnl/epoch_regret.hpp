#pragma once

// Regret accumulated over one learning epoch for a new product m, placed
// either on tier 1 (the epoch ends at the first tier-1 no-purchase) or on
// tier 2 (it ends at the first full no-purchase). The epoch length is a
// stopping time over i.i.d. customers, so the expected sum of per-customer
// losses is E[N] times the per-customer expected loss.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "smnl/catalog.hpp"
#include "smnl/choice_model.hpp"
#include "smnl/error.hpp"
#include "smnl/random.hpp"

namespace smnl {

enum class LearningStrategy { FirstTier = 1, SecondTier = 2 };

// The offer shown while m is being learned.
inline TieredOffer learning_offer(LearningStrategy s, const TieredOffer& base, ProductId m) {
  TieredOffer out(base.tier(0), base.tier(1));
  out.tiers[s == LearningStrategy::FirstTier ? 0 : 1].push_back(m);
  return out;
}

inline void check_learning_inputs(const TieredOffer& base, ProductId m, const Catalog& catalog) {
  if (base.num_tiers() > 2) throw ValidationError("base_offer", "two tiers expected");
  validate_offer(base, catalog);
  if (!catalog.contains(m)) throw UnknownProductError(m);
  if (base.contains(m)) {
    throw ValidationError("m", "product " + std::to_string(m) + " is already in the base offer");
  }
}

inline double expected_epoch_length(LearningStrategy s, const TieredOffer& offer,
                                    const Catalog& catalog) {
  const auto d = purchase_probabilities(offer, catalog);
  const double stay1 = 1.0 / d.tier_no_purchase[0];
  return s == LearningStrategy::FirstTier ? stay1 : 1.0 / d.no_purchase;
}

// Exact G for the given strategy. `benchmark` is the per-customer expected
// profit of the reference offer S*; it defaults to the base offer's.
inline double epoch_regret(LearningStrategy s, const TieredOffer& base, ProductId m,
                           const Catalog& catalog, std::optional<double> benchmark = std::nullopt) {
  check_learning_inputs(base, m, catalog);
  const double star = benchmark.value_or(expected_profit(base, catalog));
  const TieredOffer shown = learning_offer(s, base, m);
  return expected_epoch_length(s, shown, catalog) * (star - expected_profit(shown, catalog));
}

// v_m (E[R(S_2)] - r_m): the tier-2 regret when the base offer is optimal.
inline double second_tier_regret_closed_form(const TieredOffer& base, ProductId m,
                                             const Catalog& catalog) {
  check_learning_inputs(base, m, catalog);
  const Product& p = catalog.product(m);
  return p.valuation * (expected_profit_single_tier(base.tier(1), catalog) - p.profit);
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::int64_t samples = 0;
};

// Simulates `epochs` learning epochs and averages the summed per-customer
// loss (benchmark minus realized profit) over each epoch.
template <std::uniform_random_bit_generator G>
MonteCarloEstimate epoch_regret_monte_carlo(LearningStrategy s, const TieredOffer& base,
                                            ProductId m, const Catalog& catalog,
                                            std::int64_t epochs, G& gen,
                                            std::optional<double> benchmark = std::nullopt) {
  check_learning_inputs(base, m, catalog);
  if (epochs < 2) throw ValidationError("epochs", "at least two epochs are needed");
  const double star = benchmark.value_or(expected_profit(base, catalog));
  const TieredOffer shown = learning_offer(s, base, m);
  const auto tiers = to_indices(shown, catalog);
  const auto& profit = catalog.profits();
  const auto& weight = catalog.valuations();
  // Welford accumulation.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::int64_t e = 1; e <= epochs; ++e) {
    double loss = 0.0;
    while (true) {
      const IndexedChoice c = sample_indexed(tiers, weight, gen);
      loss += star - (c.tier > 0 ? profit[tiers[c.tier - 1][c.slot]] : 0.0);
      const bool ends = s == LearningStrategy::FirstTier ? c.tier != 1 : c.tier == 0;
      if (ends) break;
    }
    const double delta = loss - mean;
    mean += delta / static_cast<double>(e);
    m2 += delta * (loss - mean);
  }
  const double var = m2 / static_cast<double>(epochs - 1);
  return {mean, std::sqrt(var / static_cast<double>(epochs)), epochs};
}

struct LearningArgmin {
  TieredOffer base;
  double regret = 0.0;
};

inline constexpr std::size_t kLearningArgminCap = 531441;  // 3^12

// Minimizes the epoch regret over every base offer drawn from the candidate
// sets, with m excluded and the benchmark held fixed. The first minimizer in
// enumeration order wins ties.
inline LearningArgmin brute_force_learning_argmin(LearningStrategy s, ProductId m,
                                                  const Catalog& catalog, double benchmark) {
  if (!catalog.contains(m)) throw UnknownProductError(m);
  std::vector<ProductId> others;
  for (const Product& p : catalog.products()) {
    if (p.id != m) others.push_back(p.id);
  }
  double size = 1.0;
  for (std::size_t k = 0; k < others.size(); ++k) size *= 3.0;
  if (size > static_cast<double>(kLearningArgminCap)) {
    throw InstanceTooLargeError("learning-regret enumeration", size, kLearningArgminCap);
  }
  LearningArgmin best;
  bool found = false;
  std::vector<int> place(others.size(), 0);
  while (true) {
    bool feasible = true;
    TieredOffer base;
    for (std::size_t k = 0; k < others.size() && feasible; ++k) {
      if (place[k] == 0) continue;
      feasible = catalog.is_candidate(static_cast<std::size_t>(place[k] - 1), others[k]);
      base.tiers[static_cast<std::size_t>(place[k] - 1)].push_back(others[k]);
    }
    if (feasible) {
      const double g = epoch_regret(s, base, m, catalog, benchmark);
      if (!found || g < best.regret) {
        best = {base, g};
        found = true;
      }
    }
    std::size_t k = 0;
    while (k < place.size() && place[k] == 2) place[k++] = 0;
    if (k == place.size()) break;
    ++place[k];
  }
  return best;
}

}  // namespace smnl
