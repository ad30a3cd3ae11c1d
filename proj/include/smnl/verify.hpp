#pragma once

// Fast self-checks behind `smnl verify`, plus the statistical helpers the
// acceptance runner shares with it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "smnl/catalog.hpp"
#include "smnl/choice_model.hpp"
#include "smnl/config.hpp"
#include "smnl/epoch_regret.hpp"
#include "smnl/error.hpp"
#include "smnl/estimation.hpp"
#include "smnl/offline_opt.hpp"
#include "smnl/random.hpp"

namespace smnl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::filesystem::path fixtures;
  double ucb_scale = kUcbScale;
  std::uint64_t seed = 7;
};

// Purchase counts of product 1 in each of `epochs` closed epochs of `tier`
// (1 or 2), read off an EpochLedger. Products 2 and 3 share the offer.
template <std::uniform_random_bit_generator G>
std::vector<std::int64_t> epoch_purchase_counts(double v, int tier, std::int64_t epochs, G& gen) {
  const Catalog c = Catalog::two_tier({{1, 0.5, v, 0}, {2, 0.4, 0.2, 0}, {3, 0.3, 0.25, 0}},
                                      {1, 2}, {1, 3});
  const TieredOffer offer = tier == 1 ? TieredOffer({1, 2}, {3}) : TieredOffer({2}, {1, 3});
  EpochLedger ledger({1, 2, 3});
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(epochs));
  std::int64_t seen = 0;
  for (std::int64_t t = 1; static_cast<std::int64_t>(out.size()) < epochs; ++t) {
    const StepEvents e = ledger.record_step(offer, sample_choice(offer, c, gen), t);
    if (tier == 1 ? e.tier1_closed : e.tier2_closed) {
      out.push_back(ledger.total_count(1) - seen);
      seen = ledger.total_count(1);
    }
  }
  return out;
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
};

// Goodness of fit to P(k) = p (1-p)^k; cells with expected count below 5 are
// pooled into the tail.
inline ChiSquareResult geometric_chi_square(const std::vector<std::int64_t>& counts, double p) {
  const double n = static_cast<double>(counts.size());
  std::int64_t kmax = 0;
  while (n * p * std::pow(1.0 - p, static_cast<double>(kmax + 1)) >= 5.0) ++kmax;
  // Cells 0..kmax-1 exact, cell kmax collects k >= kmax.
  std::vector<double> observed(static_cast<std::size_t>(kmax + 1), 0.0);
  for (std::int64_t k : counts) observed[static_cast<std::size_t>(std::min(k, kmax))] += 1.0;
  ChiSquareResult r;
  for (std::int64_t k = 0; k <= kmax; ++k) {
    const double prob = k < kmax ? p * std::pow(1.0 - p, static_cast<double>(k))
                                 : std::pow(1.0 - p, static_cast<double>(kmax));
    const double expected = n * prob;
    const double diff = observed[static_cast<std::size_t>(k)] - expected;
    r.statistic += diff * diff / expected;
  }
  r.dof = static_cast<int>(kmax);
  if (r.dof < 1) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

inline double sample_mean(const std::vector<std::int64_t>& x) {
  double s = 0.0;
  for (auto v : x) s += static_cast<double>(v);
  return s / static_cast<double>(x.size());
}

inline double sample_sd(const std::vector<std::int64_t>& x) {
  const double m = sample_mean(x);
  double s = 0.0;
  for (auto v : x) s += (static_cast<double>(v) - m) * (static_cast<double>(v) - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

// The nine customers of the worked epoch example: offer ({1},{2}).
inline std::vector<ChoiceOutcome> worked_example_outcomes() {
  return {ChoiceOutcome::tier1(1), ChoiceOutcome::tier2(2), ChoiceOutcome::tier1(1),
          ChoiceOutcome::tier1(1), ChoiceOutcome::none(),   ChoiceOutcome::tier2(2),
          ChoiceOutcome::tier1(1), ChoiceOutcome::tier1(1), ChoiceOutcome::none()};
}

// Replays the example and compares labels and epoch step sets exactly.
inline CheckResult check_worked_example() {
  EpochLedger ledger({1, 2}, true);
  const TieredOffer offer({1}, {2});
  const auto outcomes = worked_example_outcomes();
  for (std::size_t t = 0; t < outcomes.size(); ++t) {
    ledger.record_step(offer, outcomes[t], static_cast<std::int64_t>(t + 1));
  }
  using Steps = std::vector<std::int64_t>;
  const bool labels = ledger.labels(1) == std::vector<EpochLabel>{0, 1, 3, 4} &&
                      ledger.labels(2) == std::vector<EpochLabel>{0, 3};
  const bool sets = ledger.steps_of(1, 0) == Steps{1, 2} && ledger.steps_of(1, 1) == Steps{3, 4, 5} &&
                    ledger.steps_of(1, 3) == Steps{6} && ledger.steps_of(1, 4) == Steps{7, 8, 9} &&
                    ledger.steps_of(2, 0) == Steps{2, 5} && ledger.steps_of(2, 3) == Steps{6, 9};
  return {"worked_example_trace", labels && sets,
          labels ? (sets ? "L1={0,1,3,4} L2={0,3}, six epoch sets match" : "epoch step sets differ")
                 : "label sets differ"};
}

inline Catalog example1_catalog() {
  return Catalog::two_tier({{1, 10.0, 0.1, 0}, {2, 1.0, 1.0, 0}}, {1, 2}, {1, 2});
}

inline CheckResult check_example1(const Catalog& c) {
  const double single = expected_profit(TieredOffer({1, 2}, {}), c);
  const double tiered = expected_profit(TieredOffer({1}, {2}), c);
  const SolveResult best = solve_two_tier(c);
  const bool ok = std::abs(single - 2.0 / 2.1) <= 1e-12 && std::abs(tiered - 15.0 / 11.0) <= 1e-12 &&
                  std::abs(single - 0.952) <= 5e-3 && std::abs(tiered - 1.36) <= 5e-3 &&
                  equivalent(best.offer, TieredOffer({1}, {2})) &&
                  std::abs(best.expected_profit - tiered) <= 1e-12;
  char buf[160];
  std::snprintf(buf, sizeof buf, "single tier %.6f, ({1},{2}) %.6f, solver %.6f", single, tiered,
                best.expected_profit);
  return {"example1", ok, buf};
}

// Random overlapping catalogs: exact solver against exhaustive search.
inline CheckResult check_brute_force(std::uint64_t seed, int instances, int max_products) {
  Rng rng = make_rng(seed, {11});
  double worst = 0.0;
  int bad_predicates = 0;
  for (int k = 0; k < instances; ++k) {
    const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_products));
    std::vector<Product> products;
    std::vector<ProductId> x1;
    std::vector<ProductId> x2;
    for (int i = 1; i <= n; ++i) {
      products.push_back({i, uniform01(rng), uniform(rng, 0.0, 0.5), 0});
      if (uniform01(rng) < 0.7) x1.push_back(i);
      if (uniform01(rng) < 0.7) x2.push_back(i);
    }
    const Catalog c = Catalog::two_tier(std::move(products), std::move(x1), std::move(x2));
    const SolveResult fast = solve_two_tier(c);
    const SolveResult slow = brute_force_optimal(c, 2);
    worst = std::max(worst, std::abs(fast.expected_profit - slow.expected_profit));
    if (!has_threshold_structure(fast.offer, c) || !is_profit_ordered_by_tier(fast.offer, c)) {
      ++bad_predicates;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d catalogs, max gap %.3g, predicate failures %d", instances, worst,
                bad_predicates);
  return {"solver_brute_force", worst <= 1e-9 && bad_predicates == 0, buf};
}

// Per-epoch counts under each tier placement against geometric(1/(1+v)).
inline CheckResult check_epoch_counts(std::uint64_t seed, double v, std::int64_t epochs) {
  Rng rng = make_rng(seed, {12});
  const double p = 1.0 / (1.0 + v);
  bool ok = true;
  std::vector<std::int64_t> pooled;
  std::string detail;
  for (int tier = 1; tier <= 2; ++tier) {
    const auto counts = epoch_purchase_counts(v, tier, epochs, rng);
    const ChiSquareResult chi = geometric_chi_square(counts, p);
    ok = ok && chi.p_value >= 0.001;
    pooled.insert(pooled.end(), counts.begin(), counts.end());
    char buf[96];
    std::snprintf(buf, sizeof buf, "tier %d chi2 p=%.3g; ", tier, chi.p_value);
    detail += buf;
  }
  const double mean = sample_mean(pooled);
  const double se = sample_sd(pooled) / std::sqrt(static_cast<double>(pooled.size()));
  ok = ok && std::abs(mean - v) <= 3.0 * se;
  char buf[96];
  std::snprintf(buf, sizeof buf, "pooled mean %.4f (target %.2f, se %.4f)", mean, v, se);
  return {"epoch_count_distribution", ok, detail + buf};
}

struct EpochRegretCase {
  Catalog catalog;
  ProductId m = 0;
  TieredOffer base;  // optimum without m
  double benchmark = 0.0;
};

// Disjoint candidate sets; m is a candidate for both tiers.
template <std::uniform_random_bit_generator G>
EpochRegretCase random_epoch_regret_case(G& rng, int n) {
  std::vector<Product> products;
  std::vector<ProductId> x1;
  std::vector<ProductId> x2;
  for (int i = 1; i <= n; ++i) {
    products.push_back({i, uniform01(rng), uniform(rng, 0.0, 0.5), 0});
    (uniform01(rng) < 0.5 ? x1 : x2).push_back(i);
  }
  const ProductId m = n + 1;
  products.push_back({m, uniform01(rng), uniform(rng, 0.0, 0.5), 0});
  x1.push_back(m);
  x2.push_back(m);
  Catalog c = Catalog::two_tier(std::move(products), std::move(x1), std::move(x2));
  const SolveResult s = solve_two_tier(c.without(m));
  return {c, m, s.offer, s.expected_profit};
}

// Monte Carlo epoch regret for both placements against exact values.
inline CheckResult check_epoch_regret(std::uint64_t seed, int instances, std::int64_t epochs) {
  Rng rng = make_rng(seed, {13});
  int mismatches = 0;
  int order = 0;
  double worst_z = 0.0;
  for (int k = 0; k < instances; ++k) {
    const auto ec = random_epoch_regret_case(rng, 2 + static_cast<int>(rng() % 5));
    const double closed = second_tier_regret_closed_form(ec.base, ec.m, ec.catalog);
    const auto g2 = epoch_regret_monte_carlo(LearningStrategy::SecondTier, ec.base, ec.m, ec.catalog,
                                             epochs, rng, ec.benchmark);
    const auto g1 = epoch_regret_monte_carlo(LearningStrategy::FirstTier, ec.base, ec.m, ec.catalog,
                                             epochs, rng, ec.benchmark);
    const double z = std::abs(g2.mean - closed) / g2.standard_error;
    worst_z = std::max(worst_z, z);
    if (z > 3.0) ++mismatches;
    const double se = std::hypot(g1.standard_error, g2.standard_error);
    if (g1.mean < g2.mean - 3.0 * se) ++order;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d instances, worst |z| %.2f, closed-form misses %d, order violations %d",
                instances, worst_z, mismatches, order);
  return {"epoch_regret_monte_carlo", mismatches == 0 && order == 0, buf};
}

// Two views of optimism. Empirical: how often the true valuation exceeds the
// index at epoch closes. Certified: the index radius at mean 1 must cover
// the concentration radius at confidence 2/(K(l-l0)).
inline CheckResult check_optimism(std::uint64_t seed, double scale) {
  Rng rng = make_rng(seed, {14});
  std::int64_t checks = 0;
  std::int64_t misses = 0;
  for (double v : {0.05, 0.3, 0.9}) {
    const Catalog c = Catalog::two_tier({{1, 1.0, v, 0}}, {1}, {});
    const TieredOffer offer({1}, {});
    for (int run = 0; run < 20; ++run) {
      EpochLedger ledger({1});
      for (std::int64_t t = 1; ledger.total_epochs(1) < 200; ++t) {
        const StepEvents e = ledger.record_step(offer, sample_choice(offer, c, rng), t);
        if (!e.tier1_closed) continue;
        ++checks;
        if (v > v_ucb(ledger, 1, 1.0, std::nullopt, scale)) ++misses;
      }
    }
  }
  const double rate = static_cast<double>(misses) / static_cast<double>(checks);
  std::int64_t uncovered = 0;
  for (std::int64_t epochs = 1; epochs <= 2000; epochs = epochs * 3 / 2 + 1) {
    for (double k : {1.0, 10.0, 100.0}) {
      for (std::int64_t elapsed = 1; elapsed <= 100000; elapsed *= 10) {
        const double index = ucb_index(1.0, epochs, k, elapsed, scale) - 1.0;
        const double need = concentration_radius(epochs, 2.0 / (k * static_cast<double>(elapsed)));
        if (index < need * (1.0 - 1e-12)) ++uncovered;
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "scale %.3g: miss rate %.4f over %lld closes, uncovered radii %lld", scale,
                rate, static_cast<long long>(checks), static_cast<long long>(uncovered));
  return {"optimism_coverage", rate <= 0.01 && uncovered == 0, buf};
}

// Every fixture parses and solves, files named malformed* must be rejected,
// and the known fixtures give their known answers.
inline std::vector<CheckResult> check_fixtures(const std::filesystem::path& dir) {
  std::vector<CheckResult> out;
  if (dir.empty() || !std::filesystem::is_directory(dir)) {
    out.push_back({"fixtures", false, "fixture missing: directory " + dir.string()});
    return out;
  }
  for (const char* name : {"example1.json", "empty.json"}) {
    if (!std::filesystem::exists(dir / name)) {
      out.push_back({std::string("fixture ") + name, false, "fixture missing: " + (dir / name).string()});
    }
  }
  if (std::filesystem::exists(dir / "example1.json")) {
    try {
      CheckResult r = check_example1(load_catalog((dir / "example1.json").string()));
      r.name = "fixture example1.json";
      out.push_back(r);
    } catch (const Error& e) {
      out.push_back({"fixture example1.json", false, e.what()});
    }
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json" && entry.path().filename() != "example1.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    const bool should_fail = name.rfind("malformed", 0) == 0;
    CheckResult r{"fixture " + name, false, ""};
    try {
      const SolveResult s = solve_two_tier(load_catalog(f.string()));
      r.passed = !should_fail;
      r.detail = should_fail ? "accepted a malformed file" : "profit " + std::to_string(s.expected_profit);
      if (name == "empty.json" && (!s.offer.empty() || s.expected_profit != 0.0)) {
        r.passed = false;
        r.detail = "empty catalog gave a non-empty offer";
      }
    } catch (const Error& e) {
      r.passed = should_fail;
      r.detail = e.what();
    }
    out.push_back(r);
  }
  return out;
}

inline std::vector<CheckResult> run_verify(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  auto guarded = [&](const std::string& name, const std::function<CheckResult()>& f) {
    try {
      out.push_back(f());
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("error: ") + e.what()});
    }
  };
  guarded("example1", [] { return check_example1(example1_catalog()); });
  guarded("worked_example_trace", [] { return check_worked_example(); });
  guarded("solver_brute_force", [&] { return check_brute_force(o.seed, 200, 8); });
  guarded("epoch_count_distribution", [&] { return check_epoch_counts(o.seed, 0.3, 20000); });
  guarded("epoch_regret_monte_carlo", [&] { return check_epoch_regret(o.seed, 5, 20000); });
  guarded("optimism_coverage", [&] { return check_optimism(o.seed, o.ucb_scale); });
  for (CheckResult& r : check_fixtures(o.fixtures)) out.push_back(std::move(r));
  return out;
}

}  // namespace smnl
