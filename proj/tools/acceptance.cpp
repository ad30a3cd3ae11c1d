// smnl_acceptance: runs every acceptance criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion.
//
// Exit codes: 0 all selected criteria pass, 1 bad arguments, 2 any failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smnl/config.hpp"
#include "smnl/epoch_regret.hpp"
#include "smnl/estimation.hpp"
#include "smnl/offline_opt.hpp"
#include "smnl/simulator.hpp"
#include "smnl/verify.hpp"

#ifndef SMNL_CLI_PATH
#define SMNL_CLI_PATH "smnl"
#endif

namespace {

using namespace smnl;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Base catalog on three disjoint candidate tiers, plus product m that is a
// candidate for every tier.
Catalog with_new_product(Rng& rng, int n, ProductId m) {
  std::vector<Product> products;
  std::vector<std::vector<ProductId>> tiers(3);
  for (int i = 1; i <= n; ++i) {
    products.push_back({i, uniform01(rng), uniform(rng, 0.0, 0.6), 0});
    tiers[rng() % 3].push_back(i);
  }
  products.push_back({m, uniform01(rng), uniform(rng, 0.01, 0.6), 0});
  for (auto& t : tiers) t.push_back(m);
  return Catalog(std::move(products), std::move(tiers));
}

CheckResult new_product_placement(std::uint64_t seed) {
  Rng rng = make_rng(seed, {21});
  const ProductId m = 100;
  int monotone = 0;
  int excluded_wrong = 0;
  int early_wrong = 0;
  int ties = 0;
  int placed = 0;
  for (int k = 0; k < 100; ++k) {
    const Catalog c = with_new_product(rng, 1 + static_cast<int>(rng() % 6), m);
    const SolveResult before = brute_force_optimal(c.without(m), 3);
    const SolveResult after = brute_force_optimal(c, 3);
    const auto s = suffix_revenues(before.offer, c);
    for (std::size_t j = 0; j + 1 < s.size(); ++j) {
      if (s[j] + 1e-12 < s[j + 1]) ++monotone;
    }
    const double r = c.product(m).profit;
    if (std::any_of(s.begin(), s.end(), [&](double x) { return std::abs(x - r) < 1e-9; })) {
      ++ties;
      continue;
    }
    const Placement pl = new_product_tier_prediction(s, r);
    const std::size_t tier = after.offer.tier_of(m);
    if (pl.excluded && tier != 0) ++excluded_wrong;
    if (!pl.excluded && tier != 0) {
      ++placed;
      if (tier < pl.earliest_tier) ++early_wrong;
    }
  }
  return {"new_product_placement", monotone == 0 && excluded_wrong == 0 && early_wrong == 0,
          fmt("100 instances (%d ties skipped, %d placed): monotonicity violations %d, "
              "exclusion violations %d, early-tier violations %d",
              ties, placed, monotone, excluded_wrong, early_wrong)};
}

// Monte Carlo against the closed form, the strategy ordering, and the
// brute-force arg-min of both epoch-regret functions.
CheckResult epoch_regret_full(std::uint64_t seed) {
  Rng rng = make_rng(seed, {22});
  int closed_misses = 0;
  int order = 0;
  int argmin_misses = 0;
  double worst_z = 0.0;
  for (int k = 0; k < 50; ++k) {
    const auto ec = random_epoch_regret_case(rng, 2 + static_cast<int>(rng() % 4));
    const double closed = second_tier_regret_closed_form(ec.base, ec.m, ec.catalog);
    const auto g2 = epoch_regret_monte_carlo(LearningStrategy::SecondTier, ec.base, ec.m, ec.catalog,
                                             100000, rng, ec.benchmark);
    const auto g1 = epoch_regret_monte_carlo(LearningStrategy::FirstTier, ec.base, ec.m, ec.catalog,
                                             100000, rng, ec.benchmark);
    const double z = std::abs(g2.mean - closed) / g2.standard_error;
    worst_z = std::max(worst_z, z);
    if (z > 3.0) ++closed_misses;
    if (g1.mean < g2.mean - 3.0 * std::hypot(g1.standard_error, g2.standard_error)) ++order;
    for (LearningStrategy s : {LearningStrategy::FirstTier, LearningStrategy::SecondTier}) {
      const auto best = brute_force_learning_argmin(s, ec.m, ec.catalog, ec.benchmark);
      const double at_optimum = epoch_regret(s, ec.base, ec.m, ec.catalog, ec.benchmark);
      if (!equivalent(best.base, ec.base) && at_optimum > best.regret + 1e-12) ++argmin_misses;
    }
  }
  return {"epoch_regret", closed_misses == 0 && order == 0 && argmin_misses == 0,
          fmt("50 instances, 1e5 epochs: worst |z| %.2f, closed-form misses %d, order violations %d, "
              "arg-min misses %d",
              worst_z, closed_misses, order, argmin_misses)};
}

CheckResult learning_criterion(std::uint64_t seed) {
  const double eps = 0.2;
  const double alpha = 0.1;
  const std::int64_t m = min_learning_epochs(eps, alpha);
  Rng rng = make_rng(seed, {23});
  int outside = 0;
  const int reps = 1000;
  for (int k = 0; k < reps; ++k) {
    const double v = uniform01(rng);
    const auto counts = epoch_purchase_counts(v, 1 + k % 2, m, rng);
    if (std::abs(sample_mean(counts) - v) > eps) ++outside;
  }
  const double frac = static_cast<double>(outside) / reps;
  return {"minimum_learning", frac <= alpha,
          fmt("M=%lld, %d replications, fraction outside eps %.4f (alpha %.2f)", static_cast<long long>(m),
              reps, frac, alpha)};
}

std::vector<ReplicationSummary> run_preset(int which, unsigned threads) {
  const ExperimentConfig c = experiment_preset(which);
  std::vector<ReplicationSummary> out;
  for (const Scenario& s : resolved_scenarios(c)) out.push_back(replicate(c, s, {}, threads));
  return out;
}

double standard_error(const ReplicationSummary& r) {
  return r.sd_final / std::sqrt(static_cast<double>(r.final_regrets.size()));
}

CheckResult exp1_ordering(unsigned threads) {
  const auto runs = run_preset(1, threads);
  bool ok = true;
  std::string means;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (k && runs[k].mean_final <= runs[k - 1].mean_final) ok = false;
    means += fmt("%s%s %.2f", k ? ", " : "", runs[k].label.c_str(), runs[k].mean_final);
  }
  return {"exp1_regret_increases_with_support", ok, "mean final regret: " + means};
}

CheckResult exp2_ratio(unsigned threads) {
  const auto runs = run_preset(2, threads);
  const double ratio = runs[0].mean_final / runs[1].mean_final;
  return {"exp2_algorithm1_below_half_benchmark", ratio < 0.5,
          fmt("algorithm1 %.2f, explore_then_exploit %.2f, ratio %.3f", runs[0].mean_final, runs[1].mean_final,
              ratio)};
}

CheckResult exp3_margin(unsigned threads) {
  const auto runs = run_preset(3, threads);
  const double se = std::hypot(standard_error(runs[0]), standard_error(runs[1]));
  const double margin = runs[1].mean_final - runs[0].mean_final;
  return {"exp3_algorithm1_beats_random_tier", margin > se,
          fmt("algorithm1 %.2f, random_tier %.2f, margin %.2f, pooled se %.2f", runs[0].mean_final,
              runs[1].mean_final, margin, se)};
}

CheckResult sublinearity(unsigned threads) {
  ExperimentConfig c = experiment_preset(2);
  for (auto& g : c.groups) g.launch_start = g.launch_spacing = 0;
  PolicySpec a1;
  a1.kind = "algorithm1";
  a1.min_epochs = 0;
  c.policy = a1;
  c.scenarios = {{"algorithm1", a1, std::nullopt}};
  c.replications = 10;
  auto per_step = [&](std::int64_t horizon) {
    c.horizon = horizon;
    return replicate(c, c.scenarios[0], {}, threads).mean_final / static_cast<double>(horizon);
  };
  const double short_run = per_step(5000);
  const double long_run = per_step(50000);
  return {"sublinear_regret", long_run < 0.5 * short_run,
          fmt("regret/T: %.5f at 5000, %.5f at 50000, ratio %.3f", short_run, long_run, long_run / short_run)};
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Two separate CLI invocations with the same config and seed.
CheckResult determinism() {
  const auto root = std::filesystem::temp_directory_path() / "smnl_acceptance_determinism";
  std::filesystem::remove_all(root);
  const std::string base = std::string(SMNL_CLI_PATH) + " experiment 2 --reps 2 --seed 11 --out ";
  const int a = shell(base + (root / "a").string());
  const int b = shell(base + (root / "b").string());
  if (a != 0 || b != 0) return {"determinism", false, fmt("cli exit codes %d and %d", a, b)};
  int compared = 0;
  int differ = 0;
  for (const auto& entry : std::filesystem::directory_iterator(root / "a")) {
    if (entry.path().extension() != ".csv") continue;
    ++compared;
    if (read_file(entry.path().string()) != read_file((root / "b" / entry.path().filename()).string())) ++differ;
  }
  std::filesystem::remove_all(root);
  return {"determinism", compared > 0 && differ == 0, fmt("%d CSV files compared, %d differ", compared, differ)};
}

struct Criterion {
  std::string id;
  std::function<CheckResult()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the tiered recommendation library"};
  std::vector<std::string> only;
  unsigned threads = 0;
  std::uint64_t seed = 7;
  app.add_option("--only", only, "criterion ids to run (1 2 3 4 5 6 7 8a 8b 8c 9 10)")->delimiter(',');
  app.add_option("--threads", threads, "replication threads (0 = hardware)");
  app.add_option("--seed", seed, "seed for the randomized criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {"1", [] { return check_example1(example1_catalog()); }},
      {"2", [] { return check_worked_example(); }},
      {"3", [&] { return check_brute_force(seed, 200, 8); }},
      {"4", [&] { return new_product_placement(seed); }},
      {"5", [&] { return check_epoch_counts(seed, 0.3, 100000); }},
      {"6", [&] { return epoch_regret_full(seed); }},
      {"7", [&] { return learning_criterion(seed); }},
      {"8a", [&] { return exp1_ordering(threads); }},
      {"8b", [&] { return exp2_ratio(threads); }},
      {"8c", [&] { return exp3_margin(threads); }},
      {"9", [&] { return sublinearity(threads); }},
      {"10", [] { return determinism(); }},
  };
  const std::set<std::string> wanted(only.begin(), only.end());
  for (const auto& id : wanted) {
    if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return c.id == id; })) {
      std::fprintf(stderr, "unknown criterion: %s\n", id.c_str());
      return 1;
    }
  }
  int failed = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {"criterion " + c.id, false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %-3s %-38s %s [%.1fs]\n", r.passed ? "PASS" : "FAIL", c.id.c_str(), r.name.c_str(),
                r.detail.c_str(), secs);
    std::fflush(stdout);
    if (!r.passed) ++failed;
  }
  return failed ? 2 : 0;
}
