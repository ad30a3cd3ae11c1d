#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "smnl/error.hpp"

namespace smnl {

using ProductId = std::int64_t;

struct Product {
  ProductId id = 0;
  double profit = 0.0;     // revenue per sale, >= 0
  double valuation = 0.0;  // MNL preference weight, in [0, 1]
  std::int64_t launch_time = 0;
};

// Products plus one candidate id list per tier. Immutable once built; the
// constructor validates every invariant and throws ValidationError.
class Catalog {
 public:
  Catalog() : candidates_(2) {}

  Catalog(std::vector<Product> products,
          std::vector<std::vector<ProductId>> candidate_tiers)
      : products_(std::move(products)), candidates_(std::move(candidate_tiers)) {
    if (candidates_.empty()) {
      throw ValidationError("candidates", "at least one candidate tier is required");
    }
    index_.reserve(products_.size());
    profits_.reserve(products_.size());
    valuations_.reserve(products_.size());
    for (std::size_t k = 0; k < products_.size(); ++k) {
      const Product& p = products_[k];
      const std::string field = "products[" + std::to_string(k) + "]";
      if (!index_.emplace(p.id, k).second) {
        throw ValidationError(field + ".id", "duplicate product id " + std::to_string(p.id));
      }
      if (!std::isfinite(p.profit) || p.profit < 0.0) {
        throw ValidationError(field + ".profit", "must be a finite non-negative number");
      }
      if (!std::isfinite(p.valuation) || p.valuation < 0.0 || p.valuation > 1.0) {
        throw ValidationError(field + ".valuation", "must lie in [0, 1]");
      }
      if (p.launch_time < 0) {
        throw ValidationError(field + ".launch_time", "must be non-negative");
      }
      profits_.push_back(p.profit);
      valuations_.push_back(p.valuation);
    }
    membership_.assign(candidates_.size(), std::vector<char>(products_.size(), 0));
    for (std::size_t tier = 0; tier < candidates_.size(); ++tier) {
      const std::string field = "candidates_tier" + std::to_string(tier + 1);
      for (ProductId id : candidates_[tier]) {
        auto it = index_.find(id);
        if (it == index_.end()) {
          throw ValidationError(field, "unknown product id " + std::to_string(id));
        }
        if (membership_[tier][it->second]) {
          throw ValidationError(field, "duplicate product id " + std::to_string(id));
        }
        membership_[tier][it->second] = 1;
      }
    }
  }

  static Catalog two_tier(std::vector<Product> products, std::vector<ProductId> tier1,
                          std::vector<ProductId> tier2) {
    return Catalog(std::move(products), {std::move(tier1), std::move(tier2)});
  }

  const std::vector<Product>& products() const noexcept { return products_; }
  std::size_t size() const noexcept { return products_.size(); }
  bool empty() const noexcept { return products_.empty(); }

  std::size_t num_candidate_tiers() const noexcept { return candidates_.size(); }

  // Candidate list of a 0-based tier; tiers past the last configured one are empty.
  const std::vector<ProductId>& candidates(std::size_t tier) const {
    static const std::vector<ProductId> kNone;
    return tier < candidates_.size() ? candidates_[tier] : kNone;
  }
  const std::vector<std::vector<ProductId>>& candidate_tiers() const noexcept {
    return candidates_;
  }

  bool contains(ProductId id) const { return index_.count(id) != 0; }

  std::optional<std::size_t> find(ProductId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(ProductId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownProductError(id);
    return it->second;
  }

  const Product& product(ProductId id) const { return products_[index_of(id)]; }

  bool is_candidate(std::size_t tier, ProductId id) const {
    if (tier >= candidates_.size()) return false;
    auto it = index_.find(id);
    return it != index_.end() && membership_[tier][it->second];
  }
  bool is_candidate_index(std::size_t tier, std::size_t index) const {
    return tier < candidates_.size() && membership_[tier][index];
  }

  // Dense views aligned with products().
  const std::vector<double>& profits() const noexcept { return profits_; }
  const std::vector<double>& valuations() const noexcept { return valuations_; }

  // A copy restricted to the given ids (candidate lists filtered accordingly).
  Catalog restricted_to(const std::unordered_set<ProductId>& keep) const {
    std::vector<Product> products;
    for (const Product& p : products_) {
      if (keep.count(p.id)) products.push_back(p);
    }
    std::vector<std::vector<ProductId>> tiers(candidates_.size());
    for (std::size_t k = 0; k < candidates_.size(); ++k) {
      for (ProductId id : candidates_[k]) {
        if (keep.count(id)) tiers[k].push_back(id);
      }
    }
    return Catalog(std::move(products), std::move(tiers));
  }

  Catalog without(ProductId id) const {
    std::unordered_set<ProductId> keep;
    for (const Product& p : products_) {
      if (p.id != id) keep.insert(p.id);
    }
    return restricted_to(keep);
  }

 private:
  std::vector<Product> products_;
  std::vector<std::vector<ProductId>> candidates_;
  std::unordered_map<ProductId, std::size_t> index_;
  std::vector<std::vector<char>> membership_;
  std::vector<double> profits_;
  std::vector<double> valuations_;
};

// Ordered tiers of product ids; tiers[0] is the priority tier.
struct TieredOffer {
  std::vector<std::vector<ProductId>> tiers;

  TieredOffer() : tiers(2) {}
  TieredOffer(std::vector<ProductId> tier1, std::vector<ProductId> tier2)
      : tiers{std::move(tier1), std::move(tier2)} {}
  explicit TieredOffer(std::vector<std::vector<ProductId>> all) : tiers(std::move(all)) {}

  const std::vector<ProductId>& tier(std::size_t k) const {
    static const std::vector<ProductId> kNone;
    return k < tiers.size() ? tiers[k] : kNone;
  }
  std::size_t num_tiers() const noexcept { return tiers.size(); }

  bool empty() const {
    return std::all_of(tiers.begin(), tiers.end(), [](const auto& t) { return t.empty(); });
  }

  // 1-based tier holding id, 0 when absent.
  std::size_t tier_of(ProductId id) const {
    for (std::size_t k = 0; k < tiers.size(); ++k) {
      if (std::find(tiers[k].begin(), tiers[k].end(), id) != tiers[k].end()) return k + 1;
    }
    return 0;
  }
  bool contains(ProductId id) const { return tier_of(id) != 0; }

  friend bool operator==(const TieredOffer&, const TieredOffer&) = default;
};

// Same tiers up to ordering within each tier (trailing empty tiers ignored).
inline bool equivalent(const TieredOffer& a, const TieredOffer& b) {
  const std::size_t n = std::max(a.num_tiers(), b.num_tiers());
  for (std::size_t k = 0; k < n; ++k) {
    auto x = a.tier(k);
    auto y = b.tier(k);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    if (x != y) return false;
  }
  return true;
}

// Offer ids must exist, appear once, and tiers must be pairwise disjoint.
inline void validate_offer(const TieredOffer& offer, const Catalog& catalog) {
  std::unordered_set<ProductId> seen;
  for (std::size_t k = 0; k < offer.tiers.size(); ++k) {
    for (ProductId id : offer.tiers[k]) {
      if (!catalog.contains(id)) throw UnknownProductError(id);
      if (!seen.insert(id).second) {
        throw ValidationError("offer.tiers[" + std::to_string(k) + "]",
                              "product " + std::to_string(id) + " appears more than once");
      }
    }
  }
}

struct ChoiceOutcome {
  enum class Kind { NoPurchase, PurchasedTier1, PurchasedTier2 };

  Kind kind = Kind::NoPurchase;
  ProductId product = 0;

  static ChoiceOutcome none() { return {}; }
  static ChoiceOutcome tier1(ProductId id) { return {Kind::PurchasedTier1, id}; }
  static ChoiceOutcome tier2(ProductId id) { return {Kind::PurchasedTier2, id}; }

  bool purchased() const noexcept { return kind != Kind::NoPurchase; }
  // The customer declined tier 1 and went on to see tier 2.
  bool reached_tier2() const noexcept { return kind != Kind::PurchasedTier1; }

  friend bool operator==(const ChoiceOutcome&, const ChoiceOutcome&) = default;
};

// Throws ValidationError when the purchased product is not on the tier the
// outcome claims.
inline void validate_outcome(const TieredOffer& offer, const ChoiceOutcome& outcome) {
  if (!outcome.purchased()) return;
  const std::size_t tier = outcome.kind == ChoiceOutcome::Kind::PurchasedTier1 ? 0 : 1;
  const auto& members = offer.tier(tier);
  if (std::find(members.begin(), members.end(), outcome.product) == members.end()) {
    throw ValidationError("outcome", "product " + std::to_string(outcome.product) +
                                         " is not on tier " + std::to_string(tier + 1) +
                                         " of the offer");
  }
}

}  // namespace smnl
