#pragma once

// Epoch bookkeeping and valuation estimates.
//
// A tier-1 epoch runs until a customer declines tier 1; a tier-2 epoch runs
// until a customer declines both tiers. Within an epoch each offered
// product's purchase count is geometric with mean v_i, so the average count
// over closed epochs estimates v_i. Labels come from one counter of completed
// epochs shared by both tiers: a new epoch takes the current count as its
// label, and when both tiers close on the same step tier 1 closes first.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "smnl/catalog.hpp"
#include "smnl/error.hpp"

namespace smnl {

using EpochLabel = std::int64_t;

struct ClosedEpoch {
  std::size_t tier = 0;       // 1 or 2
  EpochLabel label = 0;
  std::int64_t completion = 0;  // epochs completed once this one closed (1-based)
  std::vector<std::int64_t> steps;  // customers counted in this epoch (history only)
  std::vector<ProductId> offered;
  std::vector<std::int64_t> counts;  // purchases, aligned with offered
};

struct StepEvents {
  bool tier1_closed = false;
  bool tier2_closed = false;
  EpochLabel tier1_label = 0;
  EpochLabel tier2_label = 0;
};

class EpochLedger {
 public:
  // keep_history retains per-epoch step lists and counts (labelled
  // traces, replay tests). Aggregates are always kept.
  explicit EpochLedger(const std::vector<ProductId>& initial = {}, bool keep_history = false)
      : keep_history_(keep_history) {
    for (ProductId id : initial) register_product(id);
  }

  // Starts tracking a product; its launch label is the current epoch label.
  // Idempotent for already known products.
  void register_product(ProductId id) {
    if (records_.count(id)) return;
    records_.emplace(id, Record{completed_, {}});
  }

  bool knows(ProductId id) const { return records_.count(id) != 0; }

  // Records customer t's response. Products in the offer that were never
  // registered are registered on first sight.
  StepEvents record_step(const TieredOffer& offer, const ChoiceOutcome& outcome, std::int64_t t) {
    if (offer.num_tiers() > 2) throw ValidationError("offer", "ledger tracks two tiers");
    validate_outcome(offer, outcome);
    if (last_step_ && t <= *last_step_) {
      throw ValidationError("t", "time steps must be strictly increasing (got " +
                                     std::to_string(t) + " after " +
                                     std::to_string(*last_step_) + ")");
    }
    check_unchanged(open_[0], offer.tier(0), 1);
    check_unchanged(open_[1], offer.tier(1), 2);
    for (const auto& tier : offer.tiers) {
      for (ProductId id : tier) register_product(id);
    }
    open_if_closed(open_[0], offer.tier(0), 1);
    open_if_closed(open_[1], offer.tier(1), 2);
    last_step_ = t;

    StepEvents events;
    events.tier1_label = open_[0].label;
    events.tier2_label = open_[1].label;

    using Kind = ChoiceOutcome::Kind;
    add_step(open_[0], t);
    if (outcome.kind == Kind::PurchasedTier1) {
      bump(open_[0], outcome.product);
      return events;
    }
    add_step(open_[1], t);
    if (outcome.kind == Kind::PurchasedTier2) bump(open_[1], outcome.product);

    close(open_[0]);
    events.tier1_closed = true;
    if (outcome.kind == Kind::NoPurchase) {
      close(open_[1]);
      events.tier2_closed = true;
    }
    return events;
  }

  // Current label: the number of epochs completed so far.
  EpochLabel label() const noexcept { return completed_; }

  std::int64_t launch_label(ProductId id) const { return record(id).launch; }

  // Closed epochs containing id on the given tier (1 or 2, 0 = both) among
  // the first l completions. l defaults to all completions so far.
  std::int64_t epochs(ProductId id, std::size_t tier = 0,
                      std::optional<EpochLabel> l = std::nullopt) const {
    const Record& r = record(id);
    const EpochLabel upto = l.value_or(completed_);
    std::int64_t n = 0;
    for (const Entry& e : r.entries) {
      if (e.completion > upto) break;
      if (tier == 0 || e.tier == tier) ++n;
    }
    return n;
  }

  // Sum of purchase counts of id over the same epochs as epochs(id, 0, l).
  std::int64_t count_sum(ProductId id, std::optional<EpochLabel> l = std::nullopt) const {
    const Record& r = record(id);
    const EpochLabel upto = l.value_or(completed_);
    std::int64_t s = 0;
    for (const Entry& e : r.entries) {
      if (e.completion > upto) break;
      s += e.count;
    }
    return s;
  }

  // Fast path for the current state.
  std::int64_t total_epochs(ProductId id) const { return record(id).total_epochs; }
  std::int64_t total_count(ProductId id) const { return record(id).total_count; }

  // Labels of every epoch opened on a tier, in order.
  const std::vector<EpochLabel>& labels(std::size_t tier) const { return labels_.at(tier - 1); }

  // Closed epochs in closing order (only with keep_history).
  const std::vector<ClosedEpoch>& history() const noexcept { return history_; }
  bool keeps_history() const noexcept { return keep_history_; }

  // Steps of an epoch by tier and label, including the open one (history only).
  std::optional<std::vector<std::int64_t>> steps_of(std::size_t tier, EpochLabel label) const {
    for (const ClosedEpoch& e : history_) {
      if (e.tier == tier && e.label == label) return e.steps;
    }
    const Open& o = open_.at(tier - 1);
    if (o.active && o.label == label) return o.steps;
    return std::nullopt;
  }

  std::vector<ProductId> products() const {
    std::vector<ProductId> ids;
    ids.reserve(records_.size());
    for (const auto& [id, r] : records_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  // Whether a tier currently has an open epoch and its composition.
  bool epoch_open(std::size_t tier) const { return open_.at(tier - 1).active; }
  const std::vector<ProductId>& open_offer(std::size_t tier) const {
    return open_.at(tier - 1).offered;
  }

 private:
  struct Entry {
    std::int64_t completion;
    std::size_t tier;
    std::int64_t count;
  };
  struct Record {
    EpochLabel launch = 0;
    std::vector<Entry> entries;
    std::int64_t total_epochs = 0;
    std::int64_t total_count = 0;
  };
  struct Open {
    bool active = false;
    std::size_t tier = 0;
    EpochLabel label = 0;
    std::vector<ProductId> offered;
    std::vector<ProductId> sorted;
    std::vector<std::int64_t> counts;
    std::vector<std::int64_t> steps;
  };

  const Record& record(ProductId id) const {
    auto it = records_.find(id);
    if (it == records_.end()) throw UnknownProductError(id);
    return it->second;
  }

  static void check_unchanged(const Open& o, const std::vector<ProductId>& tier, std::size_t k) {
    if (!o.active) return;
    std::vector<ProductId> sorted = tier;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != o.sorted) {
      throw ValidationError("offer.tiers[" + std::to_string(k - 1) + "]",
                            "tier " + std::to_string(k) + " changed in the middle of epoch " +
                                std::to_string(o.label));
    }
  }

  void open_if_closed(Open& o, const std::vector<ProductId>& tier, std::size_t k) {
    if (o.active) return;
    o.active = true;
    o.tier = k;
    o.label = completed_;
    o.offered = tier;
    o.sorted = tier;
    std::sort(o.sorted.begin(), o.sorted.end());
    o.counts.assign(tier.size(), 0);
    o.steps.clear();
    labels_[k - 1].push_back(o.label);
  }

  void add_step(Open& o, std::int64_t t) const {
    if (keep_history_) o.steps.push_back(t);
  }

  static void bump(Open& o, ProductId id) {
    for (std::size_t s = 0; s < o.offered.size(); ++s) {
      if (o.offered[s] == id) {
        ++o.counts[s];
        return;
      }
    }
  }

  void close(Open& o) {
    ++completed_;
    for (std::size_t s = 0; s < o.offered.size(); ++s) {
      Record& r = records_.at(o.offered[s]);
      r.entries.push_back({completed_, o.tier, o.counts[s]});
      ++r.total_epochs;
      r.total_count += o.counts[s];
    }
    if (keep_history_) {
      history_.push_back({o.tier, o.label, completed_, std::move(o.steps), o.offered, o.counts});
    }
    o.active = false;
    o.steps.clear();
  }

  bool keep_history_;
  EpochLabel completed_ = 0;
  std::optional<std::int64_t> last_step_;
  std::unordered_map<ProductId, Record> records_;
  std::array<Open, 2> open_;
  std::array<std::vector<EpochLabel>, 2> labels_;
  std::vector<ClosedEpoch> history_;
};

// Average per-epoch purchase count of id over its closed epochs.
inline double v_bar(const EpochLedger& ledger, ProductId id,
                    std::optional<EpochLabel> l = std::nullopt) {
  const std::int64_t n = l ? ledger.epochs(id, 0, l) : ledger.total_epochs(id);
  if (n == 0) throw NeverOfferedError(id);
  const std::int64_t s = l ? ledger.count_sum(id, l) : ledger.total_count(id);
  return static_cast<double>(s) / static_cast<double>(n);
}

inline constexpr double kUcbScale = 48.0;

// Optimistic index from an average, an epoch count and the exploration
// horizon K * (l - l0).
inline double ucb_index(double mean, std::int64_t epochs, double num_products,
                        std::int64_t elapsed, double scale = kUcbScale) {
  const double log_term =
      std::log(num_products * static_cast<double>(std::max<std::int64_t>(elapsed, 0)) + 1.0);
  const double b = scale * log_term / static_cast<double>(epochs);
  return mean + std::sqrt(mean * b) + b;
}

inline double v_ucb(const EpochLedger& ledger, ProductId id, double num_products,
                    std::optional<EpochLabel> l = std::nullopt, double scale = kUcbScale) {
  const double mean = v_bar(ledger, id, l);
  const std::int64_t n = l ? ledger.epochs(id, 0, l) : ledger.total_epochs(id);
  const EpochLabel at = l.value_or(ledger.label());
  return ucb_index(mean, n, num_products, at - ledger.launch_label(id), scale);
}

// Epochs needed so that |v_bar - v| <= epsilon with probability >= 1 - alpha.
inline std::int64_t min_learning_epochs(double epsilon, double alpha) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("epsilon", "must be a positive finite number");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha", "must lie in (0, 1)");
  const double gap = std::sqrt(1.0 + 4.0 * epsilon) - 1.0;
  return static_cast<std::int64_t>(std::ceil(192.0 * std::log(2.0 / alpha + 1.0) / (gap * gap)));
}

// Deviation bound on v_bar after `epochs` epochs that holds with probability
// at least 1 - alpha, for valuations up to 1.
inline double concentration_radius(std::int64_t epochs, double alpha) {
  const double b = 48.0 * std::log(2.0 / alpha + 1.0) / static_cast<double>(epochs);
  return std::sqrt(b) + b;
}

}  // namespace smnl
