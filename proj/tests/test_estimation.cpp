#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <map>

#include "smnl/estimation.hpp"
#include "test_support.hpp"

using namespace smnl;
using Dec = boost::multiprecision::cpp_dec_float_50;

namespace {

// The nine customers of the worked example. Customer 6 declines tier 1 and
// buys on tier 2; customers 5 and 9 buy nothing.
std::vector<ChoiceOutcome> worked_example_outcomes() {
  return {ChoiceOutcome::tier1(1), ChoiceOutcome::tier2(2), ChoiceOutcome::tier1(1),
          ChoiceOutcome::tier1(1), ChoiceOutcome::none(),   ChoiceOutcome::tier2(2),
          ChoiceOutcome::tier1(1), ChoiceOutcome::tier1(1), ChoiceOutcome::none()};
}

using Steps = std::vector<std::int64_t>;

}  // namespace

TEST(Estimation, WorkedExampleTrace) {
  EpochLedger ledger({1, 2}, true);
  const TieredOffer offer({1}, {2});
  const auto outcomes = worked_example_outcomes();
  for (std::size_t t = 0; t < outcomes.size(); ++t) {
    ledger.record_step(offer, outcomes[t], static_cast<std::int64_t>(t + 1));
  }
  EXPECT_EQ(ledger.labels(1), (std::vector<EpochLabel>{0, 1, 3, 4}));
  EXPECT_EQ(ledger.labels(2), (std::vector<EpochLabel>{0, 3}));
  EXPECT_EQ(ledger.steps_of(1, 0), Steps({1, 2}));
  EXPECT_EQ(ledger.steps_of(1, 1), Steps({3, 4, 5}));
  EXPECT_EQ(ledger.steps_of(1, 3), Steps({6}));
  EXPECT_EQ(ledger.steps_of(1, 4), Steps({7, 8, 9}));
  EXPECT_EQ(ledger.steps_of(2, 0), Steps({2, 5}));
  EXPECT_EQ(ledger.steps_of(2, 3), Steps({6, 9}));
  EXPECT_EQ(ledger.label(), 6);
  EXPECT_EQ(ledger.epochs(1, 1), 4);
  EXPECT_EQ(ledger.epochs(2, 2), 2);
  EXPECT_DOUBLE_EQ(v_bar(ledger, 1), 5.0 / 4.0);
  EXPECT_DOUBLE_EQ(v_bar(ledger, 2), 1.0);
}

TEST(Estimation, StepEvents) {
  EpochLedger ledger({1, 2});
  const TieredOffer offer({1}, {2});
  auto e = ledger.record_step(offer, ChoiceOutcome::tier1(1), 1);
  EXPECT_FALSE(e.tier1_closed);
  e = ledger.record_step(offer, ChoiceOutcome::tier2(2), 2);
  EXPECT_TRUE(e.tier1_closed);
  EXPECT_FALSE(e.tier2_closed);
  e = ledger.record_step(offer, ChoiceOutcome::none(), 3);
  EXPECT_TRUE(e.tier1_closed);
  EXPECT_TRUE(e.tier2_closed);
  EXPECT_EQ(e.tier1_label, 1);
  EXPECT_EQ(e.tier2_label, 0);
}

TEST(Estimation, FirstCustomerBuysNothing) {
  EpochLedger ledger({1, 2, 3}, true);
  const auto e = ledger.record_step(TieredOffer({1, 3}, {2}), ChoiceOutcome::none(), 1);
  EXPECT_TRUE(e.tier1_closed);
  EXPECT_TRUE(e.tier2_closed);
  ASSERT_EQ(ledger.history().size(), 2u);
  for (const auto& epoch : ledger.history()) {
    EXPECT_EQ(epoch.label, 0);
    for (auto c : epoch.counts) EXPECT_EQ(c, 0);
  }
  EXPECT_EQ(v_bar(ledger, 1), 0.0);
  EXPECT_EQ(v_bar(ledger, 2), 0.0);
}

TEST(Estimation, VBarArithmetic) {
  EpochLedger ledger({7});
  const TieredOffer offer({7}, {});
  ledger.record_step(offer, ChoiceOutcome::none(), 1);
  ledger.record_step(offer, ChoiceOutcome::tier1(7), 2);
  ledger.record_step(offer, ChoiceOutcome::tier1(7), 3);
  ledger.record_step(offer, ChoiceOutcome::none(), 4);
  EXPECT_EQ(ledger.total_epochs(7), 2);
  EXPECT_DOUBLE_EQ(v_bar(ledger, 7), 1.0);
}

TEST(Estimation, NeverOffered) {
  EpochLedger ledger({1, 2});
  EXPECT_THROW(v_bar(ledger, 1), NeverOfferedError);
  EXPECT_THROW(v_ucb(ledger, 2, 10.0), NeverOfferedError);
  EXPECT_THROW(v_bar(ledger, 3), UnknownProductError);
  ledger.record_step(TieredOffer({1}, {}), ChoiceOutcome::tier1(1), 1);
  EXPECT_THROW(v_bar(ledger, 1), NeverOfferedError);
}

TEST(Estimation, RejectsBadSteps) {
  EpochLedger ledger({1, 2, 3});
  ledger.record_step(TieredOffer({1}, {2}), ChoiceOutcome::tier1(1), 5);
  EXPECT_THROW(ledger.record_step(TieredOffer({1}, {2}), ChoiceOutcome::tier1(1), 5), ValidationError);
  EXPECT_THROW(ledger.record_step(TieredOffer({1}, {2}), ChoiceOutcome::tier1(2), 6), ValidationError);
  EXPECT_THROW(ledger.record_step(TieredOffer({1, 3}, {2}), ChoiceOutcome::tier1(1), 7), ValidationError);
  EXPECT_THROW(ledger.record_step(TieredOffer({1}, {2, 3}), ChoiceOutcome::tier1(1), 8), ValidationError);
  // Tier 1 may change once its epoch has closed; tier 2 may not.
  ledger.record_step(TieredOffer({1}, {2}), ChoiceOutcome::tier2(2), 9);
  EXPECT_NO_THROW(ledger.record_step(TieredOffer({3}, {2}), ChoiceOutcome::tier1(3), 10));
}

TEST(Estimation, CountsMatchReplayOfRawLog) {
  Rng rng = make_rng(31);
  const std::vector<ProductId> ids = {1, 2, 3, 4, 5, 6};
  EpochLedger ledger(ids);
  struct Step {
    TieredOffer offer;
    ChoiceOutcome outcome;
  };
  std::vector<Step> log;
  auto random_subset = [&](const std::vector<ProductId>& from) {
    std::vector<ProductId> out;
    for (ProductId id : from) {
      if (uniform01(rng) < 0.5) out.push_back(id);
    }
    return out;
  };
  TieredOffer offer;
  bool tier1_fresh = true;
  bool tier2_fresh = true;
  for (std::int64_t t = 1; t <= 5000; ++t) {
    if (tier2_fresh) offer.tiers[1] = random_subset({4, 5, 6});
    if (tier1_fresh) offer.tiers[0] = random_subset({1, 2, 3});
    ChoiceOutcome o;
    const double u = uniform01(rng);
    if (u < 0.5 && !offer.tiers[0].empty()) {
      o = ChoiceOutcome::tier1(offer.tiers[0][rng() % offer.tiers[0].size()]);
    } else if (u < 0.8 && !offer.tiers[1].empty()) {
      o = ChoiceOutcome::tier2(offer.tiers[1][rng() % offer.tiers[1].size()]);
    }
    log.push_back({offer, o});
    const auto e = ledger.record_step(offer, o, t);
    tier1_fresh = e.tier1_closed;
    tier2_fresh = e.tier2_closed;
  }
  // Recount: tier-1 epochs end at every step not bought on tier 1; tier-2
  // epochs end at every step bought nowhere. Open trailing epochs are dropped.
  std::map<ProductId, std::int64_t> epochs;
  std::map<ProductId, std::int64_t> sums;
  std::map<ProductId, std::int64_t> run1;
  std::map<ProductId, std::int64_t> run2;
  for (const Step& s : log) {
    if (s.outcome.kind == ChoiceOutcome::Kind::PurchasedTier1) ++run1[s.outcome.product];
    if (s.outcome.kind == ChoiceOutcome::Kind::PurchasedTier2) ++run2[s.outcome.product];
    if (s.outcome.kind != ChoiceOutcome::Kind::PurchasedTier1) {
      for (ProductId id : s.offer.tiers[0]) {
        ++epochs[id];
        sums[id] += run1[id];
      }
      run1.clear();
    }
    if (s.outcome.kind == ChoiceOutcome::Kind::NoPurchase) {
      for (ProductId id : s.offer.tiers[1]) {
        ++epochs[id];
        sums[id] += run2[id];
      }
      run2.clear();
    }
  }
  for (ProductId id : ids) {
    EXPECT_EQ(ledger.total_epochs(id), epochs[id]) << id;
    EXPECT_EQ(ledger.epochs(id), epochs[id]) << id;
    EXPECT_EQ(ledger.total_count(id), sums[id]) << id;
    EXPECT_EQ(ledger.count_sum(id), sums[id]) << id;
  }
  // T_i(l) is non-decreasing in l and reaches the total at the current label.
  for (ProductId id : ids) {
    std::int64_t prev = 0;
    for (EpochLabel l = 0; l <= ledger.label(); l += 7) {
      const auto n = ledger.epochs(id, 0, l);
      EXPECT_GE(n, prev);
      EXPECT_EQ(n, ledger.epochs(id, 1, l) + ledger.epochs(id, 2, l));
      prev = n;
    }
  }
}

TEST(Estimation, UcbClosedFormAgainstHighPrecision) {
  const Dec vbar("0.1");
  const Dec b = Dec(48) * boost::multiprecision::log(Dec(10 * 10 + 1)) / Dec(100);
  const Dec expected = vbar + boost::multiprecision::sqrt(vbar * b) + b;
  EXPECT_NEAR(ucb_index(0.1, 100, 10.0, 10), expected.convert_to<double>(), 1e-14);
  EXPECT_EQ(ucb_index(0.37, 12, 50.0, 0), 0.37);
}

TEST(Estimation, UcbFromLedger) {
  EpochLedger ledger({1});
  const TieredOffer offer({1}, {});
  std::int64_t t = 0;
  // Launch label 0; two epochs with counts 0 and 2.
  ledger.record_step(offer, ChoiceOutcome::none(), ++t);
  ledger.record_step(offer, ChoiceOutcome::tier1(1), ++t);
  ledger.record_step(offer, ChoiceOutcome::tier1(1), ++t);
  ledger.record_step(offer, ChoiceOutcome::none(), ++t);
  ledger.register_product(2);
  // The empty tier 2 opens and closes epochs too.
  EXPECT_EQ(ledger.launch_label(2), 4);
  EXPECT_DOUBLE_EQ(v_ucb(ledger, 1, 5.0), ucb_index(1.0, 2, 5.0, 4));
  EXPECT_GE(v_ucb(ledger, 1, 5.0), v_bar(ledger, 1));
  EXPECT_DOUBLE_EQ(v_ucb(ledger, 1, 5.0, 1), ucb_index(0.0, 1, 5.0, 1));
}

TEST(Estimation, MinLearningEpochsHighPrecision) {
  auto oracle = [](const char* eps, const char* alpha) {
    const Dec e(eps);
    const Dec a(alpha);
    const Dec gap = boost::multiprecision::sqrt(Dec(1) + 4 * e) - 1;
    return boost::multiprecision::ceil(Dec(192) * boost::multiprecision::log(2 / a + 1) / (gap * gap))
        .convert_to<std::int64_t>();
  };
  EXPECT_EQ(min_learning_epochs(0.1, 0.05), oracle("0.1", "0.05"));
  EXPECT_EQ(min_learning_epochs(0.2, 0.1), oracle("0.2", "0.1"));
  EXPECT_EQ(min_learning_epochs(1.0, 0.5), oracle("1.0", "0.5"));
}

TEST(Estimation, MinLearningEpochsMonotone) {
  std::int64_t prev = min_learning_epochs(0.01, 0.1);
  for (double eps = 0.02; eps < 50; eps *= 1.5) {
    const auto m = min_learning_epochs(eps, 0.1);
    EXPECT_LE(m, prev);
    prev = m;
  }
  prev = 0;
  for (double alpha = 0.99; alpha > 1e-6; alpha /= 2) {
    const auto m = min_learning_epochs(0.2, alpha);
    EXPECT_GE(m, prev);
    prev = m;
  }
  EXPECT_THROW(min_learning_epochs(0.0, 0.1), ValidationError);
  EXPECT_THROW(min_learning_epochs(-1.0, 0.1), ValidationError);
  EXPECT_THROW(min_learning_epochs(0.1, 0.0), ValidationError);
  EXPECT_THROW(min_learning_epochs(0.1, 1.0), ValidationError);
}

TEST(Estimation, RadiusMatchesUcbAtUnitMean) {
  // alpha = 2 / (K (l - l0)) makes the two log terms identical.
  const double k = 12;
  const std::int64_t elapsed = 40;
  const double alpha = 2.0 / (k * elapsed);
  EXPECT_NEAR(ucb_index(1.0, 90, k, elapsed) - 1.0, concentration_radius(90, alpha), 1e-12);
}

namespace {

// Per-epoch purchase counts of a single product with valuation v under a
// fixed placement on the given tier.
std::vector<std::int64_t> epoch_counts(double v, std::size_t tier, int epochs, std::uint64_t seed) {
  const Catalog c = Catalog::two_tier({{1, 1.0, v, 0}, {2, 1.0, 0.4, 0}}, {1, 2}, {1, 2});
  const TieredOffer offer = tier == 1 ? TieredOffer({1}, {2}) : TieredOffer({2}, {1});
  EpochLedger ledger({1, 2}, true);
  Rng rng = make_rng(seed);
  std::int64_t t = 0;
  std::vector<std::int64_t> out;
  std::size_t seen = 0;
  while (static_cast<int>(out.size()) < epochs) {
    ledger.record_step(offer, sample_choice(offer, c, rng), ++t);
    const auto& h = ledger.history();
    for (; seen < h.size(); ++seen) {
      if (h[seen].tier != tier) continue;
      for (std::size_t s = 0; s < h[seen].offered.size(); ++s) {
        if (h[seen].offered[s] == 1) out.push_back(h[seen].counts[s]);
      }
    }
  }
  out.resize(static_cast<std::size_t>(epochs));
  return out;
}

}  // namespace

TEST(Estimation, EpochCountsAreGeometric) {
  const double v = 0.3;
  const int n = 20000;
  for (std::size_t tier : {1u, 2u}) {
    const auto counts = epoch_counts(v, tier, n, 40 + tier);
    const double p = 1.0 / (1.0 + v);
    std::vector<double> observed(8, 0.0);
    double sum = 0;
    for (auto c : counts) {
      observed[std::min<std::size_t>(static_cast<std::size_t>(c), 7)] += 1;
      sum += static_cast<double>(c);
    }
    double stat = 0;
    double tail = 1.0;
    for (std::size_t k = 0; k < 8; ++k) {
      const double prob = k < 7 ? p * std::pow(1 - p, static_cast<double>(k)) : tail;
      tail -= prob;
      const double e = prob * n;
      stat += (observed[k] - e) * (observed[k] - e) / e;
    }
    boost::math::chi_squared dist(7);
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, stat)), 0.001) << "tier " << tier;
    EXPECT_NEAR(sum / n, v, 3 * std::sqrt(v * (1 + v) / n)) << "tier " << tier;
  }
}
