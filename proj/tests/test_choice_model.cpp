#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>

#include "smnl/choice_model.hpp"
#include "test_support.hpp"

using namespace smnl;
using smnl::testing::example1;
using smnl::testing::reference_profit;

TEST(ChoiceModel, ExampleOneProfits) {
  const Catalog c = example1();
  const double single = expected_profit(TieredOffer({1, 2}, {}), c);
  const double tiered = expected_profit(TieredOffer({1}, {2}), c);
  EXPECT_NEAR(single, (10 * 0.1 + 1 * 1) / 2.1, 1e-12);
  EXPECT_NEAR(tiered, 1.0 / 1.1 + (1.0 / 1.1) * 0.5, 1e-12);
  EXPECT_NEAR(single, 0.952, 5e-3);
  EXPECT_NEAR(tiered, 1.36, 5e-3);
  EXPECT_NEAR(expected_profit_single_tier({1, 2}, c), single, 1e-12);
  EXPECT_NEAR(expected_profit_single_tier({2}, c), 0.5, 1e-12);
}

TEST(ChoiceModel, ExampleOneProbabilities) {
  const auto d = purchase_probabilities(TieredOffer({1}, {2}), example1());
  EXPECT_NEAR(d.probability(1), 0.1 / 1.1, 1e-15);
  EXPECT_NEAR(d.probability(2), 0.5 / 1.1, 1e-15);
  EXPECT_NEAR(d.no_purchase, 0.5 / 1.1, 1e-15);
  ASSERT_EQ(d.tier_no_purchase.size(), 2u);
  EXPECT_NEAR(d.tier_no_purchase[0], 1 / 1.1, 1e-15);
  EXPECT_NEAR(d.tier_no_purchase[1], 0.5, 1e-15);
  EXPECT_EQ(d.probability(99), 0.0);
}

TEST(ChoiceModel, EmptyOffer) {
  const Catalog c = example1();
  const auto d = purchase_probabilities(TieredOffer(), c);
  EXPECT_EQ(d.no_purchase, 1.0);
  EXPECT_TRUE(d.entries.empty());
  EXPECT_EQ(expected_profit(TieredOffer(), c), 0.0);
  Rng rng = make_rng(1);
  for (int k = 0; k < 100; ++k) EXPECT_FALSE(sample_choice(TieredOffer(), c, rng).purchased());
}

TEST(ChoiceModel, ZeroValuationNeverSampled) {
  const Catalog c = Catalog::two_tier({{1, 5.0, 0.0, 0}}, {1}, {});
  Rng rng = make_rng(2);
  for (int k = 0; k < 1000; ++k) EXPECT_FALSE(sample_choice(TieredOffer({1}, {}), c, rng).purchased());
}

TEST(ChoiceModel, NormalizationFactorizationAndProfitIdentity) {
  Rng rng = make_rng(3);
  for (int rep = 0; rep < 500; ++rep) {
    const Catalog c = smnl::testing::random_catalog(rng, 8, 1.0);
    TieredOffer offer;
    for (const Product& p : c.products()) {
      const auto u = rng() % 3;
      if (u > 0) offer.tiers[u - 1].push_back(p.id);
    }
    const auto d = purchase_probabilities(offer, c);
    EXPECT_NEAR(d.total(), 1.0, 1e-12);
    double v1 = 0;
    double v2 = 0;
    for (ProductId id : offer.tier(0)) v1 += c.product(id).valuation;
    for (ProductId id : offer.tier(1)) v2 += c.product(id).valuation;
    double revenue = 0;
    for (const auto& e : d.entries) {
      const double v = c.product(e.id).valuation;
      const double direct = e.tier == 1 ? v / (1 + v1) : (1 / (1 + v1)) * (v / (1 + v2));
      EXPECT_NEAR(e.probability, direct, 1e-12);
      EXPECT_GE(e.probability, 0.0);
      EXPECT_LE(e.probability, 1.0);
      revenue += c.product(e.id).profit * e.probability;
    }
    EXPECT_NEAR(expected_profit(offer, c), revenue, 1e-12);
    EXPECT_NEAR(expected_profit(offer, c), reference_profit(offer, c), 1e-12);
  }
}

TEST(ChoiceModel, ManyTierRevenueMatchesRecursion) {
  Rng rng = make_rng(4);
  for (int rep = 0; rep < 200; ++rep) {
    const Catalog c = smnl::testing::random_catalog(rng, 9, 1.0);
    TieredOffer offer(std::vector<std::vector<ProductId>>(4));
    for (const Product& p : c.products()) {
      const auto u = rng() % 5;
      if (u > 0) offer.tiers[u - 1].push_back(p.id);
    }
    EXPECT_NEAR(expected_profit(offer, c), reference_profit(offer, c), 1e-12);
    EXPECT_NEAR(purchase_probabilities(offer, c).total(), 1.0, 1e-12);
  }
}

TEST(ChoiceModel, AddingHighProfitProductToTierOneHelps) {
  Rng rng = make_rng(5);
  int checked = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const Catalog c = smnl::testing::random_catalog(rng, 8, 0.9);
    TieredOffer offer;
    std::vector<ProductId> spare;
    for (const Product& p : c.products()) {
      const auto u = rng() % 3;
      if (u > 0) offer.tiers[u - 1].push_back(p.id);
      else spare.push_back(p.id);
    }
    const double base = expected_profit(offer, c);
    for (ProductId id : spare) {
      const Product& p = c.product(id);
      if (p.valuation <= 0 || p.profit <= base) continue;
      TieredOffer more = offer;
      more.tiers[0].push_back(id);
      EXPECT_GT(expected_profit(more, c), base);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(ChoiceModel, Validation) {
  const Catalog c = example1();
  EXPECT_THROW(expected_profit(TieredOffer({1}, {1}), c), ValidationError);
  EXPECT_THROW(expected_profit(TieredOffer({3}, {}), c), UnknownProductError);
  try {
    purchase_probabilities(TieredOffer({1}, {7}), c);
    FAIL();
  } catch (const UnknownProductError& e) {
    EXPECT_EQ(e.id(), 7);
  }
  try {
    Catalog::two_tier({{1, 1.0, 0.2, 0}, {2, 1.0, 1.5, 0}}, {1}, {2});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "products[1].valuation");
  }
  EXPECT_THROW(Catalog::two_tier({{1, -1.0, 0.2, 0}}, {1}, {}), ValidationError);
  EXPECT_THROW(Catalog::two_tier({{1, 1.0, 0.2, 0}, {1, 2.0, 0.2, 0}}, {1}, {}), ValidationError);
  EXPECT_THROW(Catalog::two_tier({{1, 1.0, 0.2, 0}}, {1, 1}, {}), ValidationError);
  EXPECT_THROW(Catalog::two_tier({{1, 1.0, 0.2, 0}}, {}, {5}), ValidationError);
  EXPECT_THROW(validate_outcome(TieredOffer({1}, {2}), ChoiceOutcome::tier1(2)), ValidationError);
  EXPECT_NO_THROW(validate_outcome(TieredOffer({1}, {2}), ChoiceOutcome::tier2(2)));
}

TEST(ChoiceModel, RealizedProfit) {
  const Catalog c = example1();
  EXPECT_EQ(realized_profit(ChoiceOutcome::tier1(1), c), 10.0);
  EXPECT_EQ(realized_profit(ChoiceOutcome::tier2(2), c), 1.0);
  EXPECT_EQ(realized_profit(ChoiceOutcome::none(), c), 0.0);
}

namespace {

// Chi-square goodness of fit of sampled outcomes against the analytic
// distribution; returns the p-value.
double sampler_fit(const TieredOffer& offer, const Catalog& c, int draws, std::uint64_t seed,
                   std::map<ProductId, int>* counts_out = nullptr, int* none_out = nullptr) {
  const auto d = purchase_probabilities(offer, c);
  std::map<ProductId, int> counts;
  int none = 0;
  Rng rng = make_rng(seed);
  for (int k = 0; k < draws; ++k) {
    const auto o = sample_choice(offer, c, rng);
    if (o.purchased()) ++counts[o.product];
    else ++none;
  }
  double stat = 0;
  int cells = 0;
  auto add = [&](double p, int observed) {
    if (p <= 0) {
      EXPECT_EQ(observed, 0);
      return;
    }
    const double e = p * draws;
    stat += (observed - e) * (observed - e) / e;
    ++cells;
  };
  for (const auto& e : d.entries) add(e.probability, counts[e.id]);
  add(d.no_purchase, none);
  if (counts_out) *counts_out = counts;
  if (none_out) *none_out = none;
  boost::math::chi_squared dist(cells - 1);
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST(ChoiceModel, SamplerMatchesExampleOneWithinThreeSe) {
  const Catalog c = example1();
  const TieredOffer offer({1}, {2});
  const int n = 1000000;
  std::map<ProductId, int> counts;
  int none = 0;
  const double p = sampler_fit(offer, c, n, 11, &counts, &none);
  EXPECT_GT(p, 0.001);
  const auto d = purchase_probabilities(offer, c);
  auto within = [&](double prob, int observed) {
    const double se = std::sqrt(prob * (1 - prob) / n);
    EXPECT_NEAR(static_cast<double>(observed) / n, prob, 3 * se);
  };
  within(d.probability(1), counts[1]);
  within(d.probability(2), counts[2]);
  within(d.no_purchase, none);
}

TEST(ChoiceModel, SamplerChiSquareOnRandomOffers) {
  Rng rng = make_rng(6);
  for (int rep = 0; rep < 3; ++rep) {
    const Catalog c = smnl::testing::random_catalog(rng, 6, 1.0);
    TieredOffer offer;
    for (const Product& p : c.products()) offer.tiers[p.id % 2].push_back(p.id);
    EXPECT_GT(sampler_fit(offer, c, 1000000, 100 + rep), 0.001);
  }
}

TEST(ChoiceModel, SamplerIsDeterministicPerSeed) {
  const Catalog c = example1();
  Rng a = make_rng(9, {1, 2});
  Rng b = make_rng(9, {1, 2});
  for (int k = 0; k < 1000; ++k) {
    EXPECT_EQ(sample_choice(TieredOffer({1}, {2}), c, a), sample_choice(TieredOffer({1}, {2}), c, b));
  }
}
