#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "smnl/offline_opt.hpp"
#include "smnl/policies.hpp"
#include "smnl/simulator.hpp"
#include "test_support.hpp"

using namespace smnl;

namespace {

constexpr double kCold = 1.0 - 1e-6;

std::vector<char> all_launched(const Catalog& c) { return std::vector<char>(c.size(), 1); }

// UCB written out directly: mean + sqrt(mean b) + b, b = s ln(K e + 1) / T.
double hand_ucb(double mean, double epochs, double k, double elapsed, double s) {
  const double b = s * std::log(k * elapsed + 1.0) / epochs;
  return std::min(kCold, mean + std::sqrt(mean * b) + b);
}

Catalog disjoint_known_catalog(Rng& rng, int n) {
  return smnl::testing::random_disjoint_catalog(rng, n, 0.4);
}

}  // namespace

TEST(Policies, OracleExample1) {
  const Catalog c = smnl::testing::example1();
  OraclePolicy p;
  const auto launched = all_launched(c);
  for (std::int64_t t = 1; t <= 3; ++t) {
    EXPECT_TRUE(equivalent(p.next_offer({c, launched, t}), TieredOffer({1}, {2})));
  }
}

TEST(Policies, OracleEmptyCatalog) {
  const Catalog c = Catalog::two_tier({}, {}, {});
  OraclePolicy p;
  const std::vector<char> launched;
  EXPECT_TRUE(p.next_offer({c, launched, 1}).empty());
}

TEST(Policies, OracleChangesOnlyWhenTheOptimumDoes) {
  // Product 4 launches at t=50 and enters the optimum; product 5 launches at
  // t=80 with no profit and leaves it unchanged.
  const Catalog c = Catalog::two_tier({{1, 0.6, 0.2, 0},
                                       {2, 0.5, 0.3, 0},
                                       {3, 0.3, 0.2, 0},
                                       {4, 0.95, 0.4, 50},
                                       {5, 0.0, 0.5, 80}},
                                      {1, 4, 5}, {2, 3, 5});
  OraclePolicy p;
  std::vector<char> launched(c.size(), 0);
  TieredOffer previous;
  std::vector<std::int64_t> changes;
  for (std::int64_t t = 1; t <= 100; ++t) {
    for (std::size_t i = 0; i < c.size(); ++i) launched[i] = c.products()[i].launch_time <= t;
    const TieredOffer o = p.next_offer({c, launched, t});
    if (t > 1 && !equivalent(o, previous)) changes.push_back(t);
    previous = o;
  }
  EXPECT_EQ(changes, std::vector<std::int64_t>{50});
  EXPECT_TRUE(previous.contains(4));
}

TEST(Policies, KnownValuationsGiveTheOptimumEveryStep) {
  Rng rng = make_rng(71);
  for (int rep = 0; rep < 20; ++rep) {
    const Catalog c = smnl::testing::random_catalog(rng, 7, 0.4);
    Algorithm1Options o;
    o.known = all_launched(c);
    Algorithm1 policy(c, o);
    const SolveResult best = solve_two_tier(c);
    const auto launched = all_launched(c);
    Rng choice = make_rng(72, {static_cast<std::uint64_t>(rep)});
    for (std::int64_t t = 1; t <= 300; ++t) {
      const TieredOffer offer = policy.next_offer({c, launched, t});
      ASSERT_NEAR(expected_profit(offer, c), best.expected_profit, 1e-12);
      policy.observe(offer, sample_choice(offer, c, choice), t);
    }
  }
}

TEST(Policies, LowProfitProductsExcludedWithoutLearningConstraint) {
  Rng rng = make_rng(73);
  for (int rep = 0; rep < 100; ++rep) {
    const Catalog c = disjoint_known_catalog(rng, 8);
    Algorithm1Options o;
    o.known = all_launched(c);
    Algorithm1 policy(c, o);
    const auto launched = all_launched(c);
    const TieredOffer offer = policy.next_offer({c, launched, 1});
    const double tier2_revenue = expected_profit_single_tier(offer.tier(1), c);
    for (const Product& p : c.products()) {
      if (p.profit < tier2_revenue - 1e-12) {
        EXPECT_FALSE(offer.contains(p.id)) << "product " << p.id;
      }
    }
  }
}

// Five customers scripted by hand. Products 1 (r=1) and 2 (r=0.1) are tier-1
// candidates, product 3 (r=0.5) a tier-2 candidate; UCB constant 0.05.
TEST(Policies, ScriptedTraceMatchesHandComputation) {
  const Catalog c = Catalog::two_tier({{1, 1.0, 0.3, 0}, {2, 0.1, 0.3, 0}, {3, 0.5, 0.3, 0}}, {1, 2}, {3});
  Algorithm1Options o;
  o.ucb_scale = 0.05;
  Algorithm1 policy(c, o);
  const auto launched = all_launched(c);
  const std::vector<ChoiceOutcome> script = {ChoiceOutcome::tier1(1), ChoiceOutcome::tier2(3),
                                             ChoiceOutcome::none(), ChoiceOutcome::none(),
                                             ChoiceOutcome::tier1(1)};
  // Index vectors seen when the offer for customer t is formed.
  const std::vector<std::vector<double>> expected_weights = {
      {kCold, kCold, kCold},
      {kCold, kCold, kCold},
      // t=3: tier-1 epoch {1}: one purchase; label 1, so K(l-l0) = 3.
      {hand_ucb(1.0, 1, 3, 1, 0.05), kCold, kCold},
      // t=4: product 1 has 1 purchase over 2 epochs, product 3 1 over 1; label 3.
      {hand_ucb(0.5, 2, 3, 3, 0.05), kCold, hand_ucb(1.0, 1, 3, 3, 0.05)},
      // t=5: product 1: 1 over 3, product 3: 1 over 2; label 5.
      {hand_ucb(1.0 / 3.0, 3, 3, 5, 0.05), kCold, hand_ucb(0.5, 2, 3, 5, 0.05)},
  };
  EXPECT_NEAR(expected_weights[3][0], 0.727219, 1e-6);
  EXPECT_NEAR(expected_weights[4][0], 0.503653, 1e-6);
  EXPECT_NEAR(expected_weights[4][2], 0.755479, 1e-6);
  for (std::size_t k = 0; k < script.size(); ++k) {
    const auto t = static_cast<std::int64_t>(k + 1);
    const TieredOffer offer = policy.next_offer({c, launched, t});
    if (k != 1) {  // customer 2 reuses the offer, so the indices are not refreshed
      for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(policy.weights()[i], expected_weights[k][i], 1e-12) << "t=" << t << " i=" << i;
      }
    }
    EXPECT_TRUE(equivalent(offer, TieredOffer({1}, {3}))) << "t=" << t;
    const SolveResult best = brute_force_optimal(c, 2, policy.weights());
    EXPECT_NEAR(tiered_revenue(to_indices(offer, c), c.profits(), policy.weights()), best.expected_profit,
                1e-12);
    policy.observe(offer, script[k], t);
  }
}

TEST(Policies, UnderLearnedLowProfitProductIsHeldOnTierTwo) {
  // Products 1-4 are known; product 5 is new, low-profit, allowed on both tiers.
  const Catalog c = Catalog::two_tier(
      {{1, 0.9, 0.3, 0}, {2, 0.8, 0.2, 0}, {3, 0.6, 0.3, 0}, {4, 0.5, 0.2, 0}, {5, 0.05, 0.3, 0}},
      {1, 2, 5}, {3, 4, 5});
  Algorithm1Options o;
  o.min_epochs = 40;
  o.known = {1, 1, 1, 1, 0};
  Algorithm1 policy(c, o);
  const auto launched = all_launched(c);
  Rng choice = make_rng(74);
  int held_steps = 0;
  std::int64_t learned_at = 0;
  std::int64_t last_offered = 0;
  for (std::int64_t t = 1; t <= 20000; ++t) {
    const TieredOffer offer = policy.next_offer({c, launched, t});
    const auto held = policy.held_products();
    const bool learned = policy.ledger().total_epochs(5) >= 40;
    if (learned && learned_at == 0) learned_at = t;
    if (!learned) {
      ASSERT_TRUE(offer.contains(5)) << "under-learned product missing at t=" << t;
    }
    if (offer.contains(5)) last_offered = t;
    EXPECT_NE(offer.tier_of(5), 1u);
    if (!held.empty()) {
      ++held_steps;
      EXPECT_EQ(held, std::vector<ProductId>{5});
      EXPECT_EQ(offer.tier_of(5), 2u);
    }
    policy.observe(offer, sample_choice(offer, c, choice), t);
  }
  ASSERT_GT(learned_at, 0);
  EXPECT_GT(held_steps, 0);
  // Once learned, the low-profit product drops out at the next tier-2 epoch.
  EXPECT_LT(last_offered - learned_at, 200);
}

TEST(Policies, EveryProductEventuallyMeetsTheLearningTarget) {
  Rng rng = make_rng(75);
  const Catalog c = smnl::testing::random_catalog(rng, 6, 0.3);
  Algorithm1Options o;
  o.min_epochs = 30;
  Algorithm1 policy(c, o);
  const auto launched = all_launched(c);
  Rng choice = make_rng(76);
  bool fresh = true;
  for (std::int64_t t = 1; t <= 30000; ++t) {
    const TieredOffer offer = policy.next_offer({c, launched, t});
    // The held set is chosen at tier-2 epoch starts.
    if (fresh) {
      for (ProductId id : policy.held_products()) EXPECT_LT(policy.ledger().total_epochs(id), 30);
    }
    const ChoiceOutcome outcome = sample_choice(offer, c, choice);
    fresh = outcome.kind == ChoiceOutcome::Kind::NoPurchase;
    policy.observe(offer, outcome, t);
  }
  for (const Product& p : c.products()) {
    const bool candidate = c.is_candidate(0, p.id) || c.is_candidate(1, p.id);
    if (candidate) {
      EXPECT_GE(policy.ledger().total_epochs(p.id), 30) << "product " << p.id;
    }
  }
}

TEST(Policies, RandomTierMatchesAlgorithm1WhenTheCoinIsIrrelevant) {
  // The new product may only sit on tier 2, so the coin is never consulted.
  ExperimentConfig cfg;
  cfg.horizon = 3000;
  cfg.catalog = Catalog::two_tier(
      {{1, 0.9, 0.2, 0}, {2, 0.6, 0.3, 0}, {3, 0.4, 0.2, 0}, {4, 0.1, 0.3, 0}}, {1}, {2, 3, 4});
  cfg.policy.kind = "algorithm1";
  cfg.policy.min_epochs = 25;
  PolicySpec rnd = cfg.policy;
  rnd.kind = "random_tier";
  const RegretTrace a = run_replication(cfg, {"a", cfg.policy, std::nullopt}, 0);
  const RegretTrace b = run_replication(cfg, {"b", rnd, std::nullopt}, 0);
  EXPECT_EQ(a.offers, b.offers);
  EXPECT_EQ(a.cumulative, b.cumulative);
}

TEST(Policies, RandomTierSplitsHeldProductsBetweenTiers) {
  const Catalog c = Catalog::two_tier(
      {{1, 0.9, 0.2, 0}, {2, 0.8, 0.2, 0}, {3, 0.6, 0.3, 0}, {4, 0.05, 0.3, 0}}, {1, 2, 4}, {3, 4});
  Algorithm1Options o;
  o.min_epochs = 1'000'000;
  o.known = {1, 1, 1, 0};
  o.random_tier = true;
  Algorithm1 policy(c, o, make_rng(77));
  const auto launched = all_launched(c);
  Rng choice = make_rng(78);
  int decisions[3] = {0, 0, 0};
  bool fresh = true;
  for (std::int64_t t = 1; t <= 40000; ++t) {
    const TieredOffer offer = policy.next_offer({c, launched, t});
    if (fresh) ++decisions[offer.tier_of(4)];
    const ChoiceOutcome outcome = sample_choice(offer, c, choice);
    fresh = outcome.kind == ChoiceOutcome::Kind::NoPurchase;
    policy.observe(offer, outcome, t);
  }
  EXPECT_EQ(decisions[0], 0);
  const double share = decisions[1] / static_cast<double>(decisions[1] + decisions[2]);
  EXPECT_NEAR(share, 0.5, 0.05);
}

TEST(Policies, ExploreThenExploitFirstOfferIsTheIncumbent) {
  const Catalog c = smnl::testing::example1();
  ExploreThenExploit p(c, {0.0});
  const auto launched = all_launched(c);
  // Every estimate starts at zero, so the first enumerated candidate (the
  // empty offer) is the incumbent at t=1.
  EXPECT_TRUE(p.next_offer({c, launched, 1}).empty());
}

TEST(Policies, ExploreThenExploitWithoutQuotaExploitsAfterOnePass) {
  Rng rng = make_rng(79);
  const Catalog c = smnl::testing::random_disjoint_catalog(rng, 5, 0.4);
  ExploreThenExploit p(c, {0.0});
  const auto launched = all_launched(c);
  Rng choice = make_rng(80);
  std::set<std::pair<std::vector<ProductId>, std::vector<ProductId>>> seen;
  bool decision = true;
  for (std::int64_t t = 1; t <= 5000; ++t) {
    const TieredOffer offer = p.next_offer({c, launched, t});
    if (decision && seen.size() == p.num_candidates()) {
      // Exploitation: the offer maximizes profit under the running averages.
      std::vector<double> est(c.size(), 0.0);
      for (std::size_t i = 0; i < c.size(); ++i) {
        const ProductId id = c.products()[i].id;
        if (p.ledger().knows(id) && p.ledger().total_epochs(id) > 0) est[i] = v_bar(p.ledger(), id);
      }
      const auto ids = detail::catalog_ids(c);
      const auto problem = detail::launched_problem({c, launched, t}, est, ids);
      double best = 0.0;
      for (const auto& cand : prefix_pair_offers(problem)) {
        const std::vector<std::size_t> tiers[2] = {cand.tier1, cand.tier2};
        best = std::max(best, tiered_revenue(tiers, c.profits(), est));
      }
      EXPECT_NEAR(tiered_revenue(to_indices(offer, c), c.profits(), est), best, 1e-12) << "t=" << t;
    }
    seen.insert({offer.tier(0), offer.tier(1)});
    const ChoiceOutcome outcome = sample_choice(offer, c, choice);
    decision = outcome.kind == ChoiceOutcome::Kind::NoPurchase;
    p.observe(offer, outcome, t);
  }
  EXPECT_EQ(seen.size(), p.num_candidates());
}

TEST(Policies, Deterministic) {
  Rng rng = make_rng(81);
  const Catalog c = smnl::testing::random_catalog(rng, 6, 0.3);
  auto trace = [&] {
    Algorithm1Options o;
    o.min_epochs = 10;
    o.random_tier = true;
    Algorithm1 policy(c, o, make_rng(82));
    Rng choice = make_rng(83);
    return run(c, policy, 2000, choice);
  };
  const RegretTrace a = trace();
  const RegretTrace b = trace();
  EXPECT_EQ(a.offers, b.offers);
  EXPECT_EQ(a.cumulative, b.cumulative);
}

TEST(Policies, RejectsBadOptions) {
  const Catalog c = smnl::testing::example1();
  Algorithm1Options o;
  o.min_epochs = -1;
  EXPECT_THROW(Algorithm1(c, o), ValidationError);
  o.min_epochs = 0;
  o.known = {1};
  EXPECT_THROW(Algorithm1(c, o), ValidationError);
  EXPECT_THROW(ExploreThenExploit(c, {-1.0}), ValidationError);
}
