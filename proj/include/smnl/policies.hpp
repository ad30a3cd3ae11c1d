#pragma once

// Online recommendation policies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "smnl/catalog.hpp"
#include "smnl/choice_model.hpp"
#include "smnl/estimation.hpp"
#include "smnl/offline_opt.hpp"
#include "smnl/random.hpp"

namespace smnl {

// What a policy sees at time t. Learning policies read profits, candidate
// lists and launch flags only; valuations are ground truth and are used by
// the oracle and for products flagged as known.
struct MarketView {
  const Catalog& catalog;
  const std::vector<char>& launched;  // aligned with catalog.products()
  std::int64_t t;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual TieredOffer next_offer(const MarketView& view) = 0;
  virtual void observe(const TieredOffer& offer, const ChoiceOutcome& outcome, std::int64_t t) = 0;
};

namespace detail {

inline TwoTierProblem launched_problem(const MarketView& view, std::span<const double> weights,
                                       std::span<const ProductId> ids) {
  const Catalog& c = view.catalog;
  TwoTierProblem p;
  p.profit = c.profits();
  p.weight = weights;
  p.ids = ids;
  for (std::size_t k = 0; k < 2; ++k) {
    auto& out = k == 0 ? p.tier1 : p.tier2;
    for (ProductId id : c.candidates(k)) {
      const std::size_t i = c.index_of(id);
      if (view.launched[i]) out.push_back(i);
    }
  }
  return p;
}

inline std::vector<ProductId> to_ids(const Catalog& c, const std::vector<std::size_t>& idx) {
  std::vector<ProductId> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(c.products()[i].id);
  return out;
}

}  // namespace detail

// Offers nothing; the worst case for regret accounting.
class EmptyPolicy final : public Policy {
 public:
  std::string name() const override { return "empty"; }
  TieredOffer next_offer(const MarketView&) override { return {}; }
  void observe(const TieredOffer&, const ChoiceOutcome&, std::int64_t) override {}
};

// Clairvoyant: the offline optimum over launched products.
class OraclePolicy final : public Policy {
 public:
  std::string name() const override { return "oracle"; }

  TieredOffer next_offer(const MarketView& view) override {
    if (!cached_ || view.launched != launched_) {
      launched_ = view.launched;
      ids_ = detail::catalog_ids(view.catalog);
      const auto p = detail::launched_problem(view, view.catalog.valuations(), ids_);
      const auto sol = solve_two_tier_indexed(p);
      offer_ = TieredOffer(detail::to_ids(view.catalog, sol.tier1),
                           detail::to_ids(view.catalog, sol.tier2));
      cached_ = true;
    }
    return offer_;
  }

  void observe(const TieredOffer&, const ChoiceOutcome&, std::int64_t) override {}

 private:
  bool cached_ = false;
  std::vector<char> launched_;
  std::vector<ProductId> ids_;
  TieredOffer offer_;
};

struct Algorithm1Options {
  std::int64_t min_epochs = 0;  // M
  double ucb_scale = kUcbScale;
  // Index for products with no closed epoch yet; also caps every UCB, since
  // valuations never exceed 1.
  double cold_start = 1.0 - 1e-6;
  // Under-learned products left out of the optimized offer go to a random
  // tier (probability 1/2 each) instead of tier 2.
  bool random_tier = false;
  // Products whose valuations the learner knows (aligned with the catalog).
  std::vector<char> known;
};

// UCB exploration-exploitation with a minimum learning requirement. A full
// re-optimization happens at the start of every tier-2 epoch; when only the
// tier-1 epoch ends, tier 1 is re-optimized with tier 2 held fixed.
class Algorithm1 final : public Policy {
 public:
  Algorithm1(const Catalog& catalog, Algorithm1Options options, Rng rng = make_rng(0))
      : options_(std::move(options)), rng_(rng), ids_(detail::catalog_ids(catalog)) {
    if (options_.min_epochs < 0) throw ValidationError("min_epochs", "must be non-negative");
    if (!(options_.ucb_scale >= 0.0)) throw ValidationError("ucb_scale", "must be non-negative");
    if (!(options_.cold_start > 0.0 && options_.cold_start <= 1.0)) {
      throw ValidationError("cold_start", "must lie in (0, 1]");
    }
    if (options_.known.empty()) options_.known.assign(catalog.size(), 0);
    if (options_.known.size() != catalog.size()) {
      throw ValidationError("known", "must have one flag per product");
    }
    weights_.assign(catalog.size(), 0.0);
  }

  std::string name() const override {
    return options_.random_tier ? "random_tier" : "algorithm1";
  }

  TieredOffer next_offer(const MarketView& view) override {
    const Catalog& c = view.catalog;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (view.launched[i]) ledger_.register_product(ids_[i]);
    }
    if (need_full_) {
      refresh_weights(view);
      const auto p = detail::launched_problem(view, weights_, ids_);
      const IndexedSolution sol = solve_two_tier_indexed(p);
      std::vector<char> selected(c.size(), 0);
      for (std::size_t i : sol.tier1) selected[i] = 1;
      for (std::size_t i : sol.tier2) selected[i] = 1;
      hold_tier1_.clear();
      hold_tier2_.clear();
      // Held products stay within their candidate tiers; the coin is only
      // needed when both tiers are allowed.
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (!view.launched[i] || selected[i] || !under_learned(i)) continue;
        const bool first = c.is_candidate_index(0, i);
        const bool second = c.is_candidate_index(1, i);
        if (!first && !second) continue;
        bool to_first = !second;
        if (first && second && options_.random_tier) to_first = uniform01(rng_) < 0.5;
        (to_first ? hold_tier1_ : hold_tier2_).push_back(i);
      }
      optimized_tier2_ = sol.tier2;
      std::vector<std::size_t> tier2 = sol.tier2;
      tier2.insert(tier2.end(), hold_tier2_.begin(), hold_tier2_.end());
      offer_.tiers[1] = detail::to_ids(c, tier2);
      set_tier1(c, sol.tier1);
      need_full_ = false;
      need_tier1_ = false;
    } else if (need_tier1_) {
      refresh_weights(view);
      const auto p = detail::launched_problem(view, weights_, ids_);
      std::vector<std::size_t> blocked = hold_tier1_;
      for (ProductId id : offer_.tiers[1]) blocked.push_back(c.index_of(id));
      const IndexedSolution sol = best_first_tier_given(p, optimized_tier2_, blocked);
      set_tier1(c, sol.tier1);
      need_tier1_ = false;
    }
    return offer_;
  }

  void observe(const TieredOffer& offer, const ChoiceOutcome& outcome, std::int64_t t) override {
    const StepEvents e = ledger_.record_step(offer, outcome, t);
    if (e.tier2_closed) need_full_ = true;
    else if (e.tier1_closed) need_tier1_ = true;
  }

  const EpochLedger& ledger() const noexcept { return ledger_; }
  // Current index per product (0 for products not launched yet).
  const std::vector<double>& weights() const noexcept { return weights_; }
  // Under-learned products appended to the current offer.
  std::vector<ProductId> held_products() const {
    std::vector<ProductId> out;
    for (std::size_t i : hold_tier1_) out.push_back(ids_[i]);
    for (std::size_t i : hold_tier2_) out.push_back(ids_[i]);
    return out;
  }

 private:
  bool under_learned(std::size_t i) const {
    return !options_.known[i] && ledger_.total_epochs(ids_[i]) < options_.min_epochs;
  }

  void refresh_weights(const MarketView& view) {
    const Catalog& c = view.catalog;
    const double k = static_cast<double>(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!view.launched[i]) {
        weights_[i] = 0.0;
      } else if (options_.known[i]) {
        weights_[i] = c.valuations()[i];
      } else if (ledger_.total_epochs(ids_[i]) == 0) {
        weights_[i] = options_.cold_start;
      } else {
        weights_[i] = std::min(options_.cold_start,
                               v_ucb(ledger_, ids_[i], k, std::nullopt, options_.ucb_scale));
      }
    }
  }

  void set_tier1(const Catalog& c, const std::vector<std::size_t>& optimized) {
    std::vector<std::size_t> tier1 = optimized;
    tier1.insert(tier1.end(), hold_tier1_.begin(), hold_tier1_.end());
    offer_.tiers[0] = detail::to_ids(c, tier1);
  }

  Algorithm1Options options_;
  Rng rng_;
  std::vector<ProductId> ids_;
  EpochLedger ledger_;
  std::vector<double> weights_;
  bool need_full_ = true;
  bool need_tier1_ = false;
  std::vector<std::size_t> optimized_tier2_;
  std::vector<std::size_t> hold_tier1_;
  std::vector<std::size_t> hold_tier2_;
  TieredOffer offer_;
};

struct ExploreThenExploitOptions {
  double gamma = 30.0;
};

// Benchmark that separates exploration from exploitation. Candidates are the
// profit-prefix pairs of the launched candidate lists. At each tier-2 epoch
// start it compares candidates by their expected profit under the running
// valuation averages (0 while unseen). A candidate beating the incumbent
// (the best candidate that has met its display quota) is explored until it
// has been shown gamma * ln(t) times; candidates never shown are explored
// once. Otherwise the incumbent is offered.
class ExploreThenExploit final : public Policy {
 public:
  explicit ExploreThenExploit(const Catalog& catalog, ExploreThenExploitOptions options = {})
      : options_(options), ids_(detail::catalog_ids(catalog)) {
    if (!(options_.gamma >= 0.0)) throw ValidationError("gamma", "must be non-negative");
    estimates_.assign(catalog.size(), 0.0);
  }

  std::string name() const override { return "explore_then_exploit"; }

  TieredOffer next_offer(const MarketView& view) override {
    if (!need_decision_) {
      ++shown_[current_];
      return offer_;
    }
    if (view.launched != launched_) {
      launched_ = view.launched;
      const auto p = detail::launched_problem(view, estimates_, ids_);
      candidates_ = prefix_pair_offers(p);
      shown_.assign(candidates_.size(), 0);
    }
    const Catalog& c = view.catalog;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const ProductId id = ids_[i];
      estimates_[i] = ledger_.knows(id) && ledger_.total_epochs(id) > 0 ? v_bar(ledger_, id) : 0.0;
    }
    std::vector<double> value(candidates_.size());
    for (std::size_t k = 0; k < candidates_.size(); ++k) {
      const std::vector<std::size_t> tiers[2] = {candidates_[k].tier1, candidates_[k].tier2};
      value[k] = tiered_revenue(tiers, c.profits(), estimates_);
    }
    const double quota = options_.gamma * std::log(static_cast<double>(std::max<std::int64_t>(view.t, 1)));
    auto met = [&](std::size_t k) { return static_cast<double>(shown_[k]) >= quota; };

    std::size_t incumbent = 0;
    bool have_incumbent = false;
    for (std::size_t k = 0; k < candidates_.size(); ++k) {
      if (met(k) && (!have_incumbent || value[k] > value[incumbent])) {
        incumbent = k;
        have_incumbent = true;
      }
    }
    std::size_t choice = incumbent;
    bool exploring = false;
    for (std::size_t k = 0; k < candidates_.size(); ++k) {
      const bool wanted = (view.t > 1 && shown_[k] == 0) ||
                          (!met(k) && (!have_incumbent || value[k] > value[incumbent]));
      if (!wanted) continue;
      if (!exploring || shown_[k] < shown_[choice]) {
        choice = k;
        exploring = true;
      }
    }
    current_ = choice;
    ++shown_[current_];
    offer_ = TieredOffer(detail::to_ids(c, candidates_[current_].tier1),
                         detail::to_ids(c, candidates_[current_].tier2));
    need_decision_ = false;
    return offer_;
  }

  void observe(const TieredOffer& offer, const ChoiceOutcome& outcome, std::int64_t t) override {
    if (ledger_.record_step(offer, outcome, t).tier2_closed) need_decision_ = true;
  }

  const EpochLedger& ledger() const noexcept { return ledger_; }
  std::size_t num_candidates() const noexcept { return candidates_.size(); }

 private:
  ExploreThenExploitOptions options_;
  std::vector<ProductId> ids_;
  EpochLedger ledger_;
  std::vector<double> estimates_;
  std::vector<char> launched_;
  std::vector<IndexedSolution> candidates_;
  std::vector<std::int64_t> shown_;
  std::size_t current_ = 0;
  bool need_decision_ = true;
  TieredOffer offer_;
};

}  // namespace smnl
