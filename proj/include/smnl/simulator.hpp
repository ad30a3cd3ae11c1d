#pragma once

// Customer-by-customer simulation of a policy against the true choice model,
// with pseudo-regret measured against the clairvoyant optimum over the
// products launched so far.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "smnl/catalog.hpp"
#include "smnl/choice_model.hpp"
#include "smnl/estimation.hpp"
#include "smnl/offline_opt.hpp"
#include "smnl/policies.hpp"
#include "smnl/random.hpp"

namespace smnl {

// A block of generated products. Profits and valuations are uniform on the
// given ranges; the k-th product of the block launches at
// launch_start + k * launch_spacing.
struct ProductGroup {
  std::string name;
  int count = 0;
  double profit_lo = 0.0;
  double profit_hi = 1.0;
  double valuation_lo = 0.0;
  double valuation_hi = 0.1;
  std::string candidates = "both";  // tier1 | tier2 | both | alternate
  std::int64_t launch_start = 0;
  std::int64_t launch_spacing = 0;
  bool known = false;  // valuations revealed to the learner
};

struct PolicySpec {
  std::string kind = "algorithm1";  // algorithm1 | random_tier | explore_then_exploit | oracle | empty
  std::optional<std::int64_t> min_epochs;
  std::optional<double> epsilon;
  std::optional<double> alpha;
  double gamma = 30.0;
  double ucb_scale = kUcbScale;
  double cold_start = 1.0 - 1e-6;
};

struct Scenario {
  std::string label;
  std::optional<PolicySpec> policy;
  // Overrides every group's valuation range.
  std::optional<std::pair<double, double>> valuation_support;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::int64_t horizon = 1000;
  std::uint64_t seed = 1;
  int replications = 1;
  std::string benchmark = "launched";  // launched | all
  std::optional<Catalog> catalog;      // explicit catalog, or generated from groups
  std::vector<ProductId> known_products;
  std::vector<ProductGroup> groups;
  PolicySpec policy;
  std::vector<Scenario> scenarios;  // empty: one scenario using `policy`
  std::map<std::string, std::string> provenance;
  bool record_offers = true;
};

inline const std::vector<std::string>& policy_kinds() {
  static const std::vector<std::string> kinds = {"algorithm1", "random_tier",
                                                 "explore_then_exploit", "oracle", "empty"};
  return kinds;
}

inline void validate_policy(const PolicySpec& p, const std::string& field) {
  const auto& kinds = policy_kinds();
  if (std::find(kinds.begin(), kinds.end(), p.kind) == kinds.end()) {
    throw ValidationError(field + ".kind", "unknown policy '" + p.kind + "'");
  }
  if (p.min_epochs && *p.min_epochs < 0) {
    throw ValidationError(field + ".min_epochs", "must be non-negative");
  }
  if (p.min_epochs && (p.epsilon || p.alpha)) {
    throw ValidationError(field, "give either min_epochs or epsilon/alpha, not both");
  }
  if (p.epsilon.has_value() != p.alpha.has_value()) {
    throw ValidationError(field, "epsilon and alpha must be given together");
  }
  if (p.epsilon) min_learning_epochs(*p.epsilon, *p.alpha);
  if (!(p.gamma >= 0.0)) throw ValidationError(field + ".gamma", "must be non-negative");
  if (!(p.ucb_scale >= 0.0)) throw ValidationError(field + ".ucb_scale", "must be non-negative");
  if (!(p.cold_start > 0.0 && p.cold_start <= 1.0)) {
    throw ValidationError(field + ".cold_start", "must lie in (0, 1]");
  }
}

inline std::int64_t resolved_min_epochs(const PolicySpec& p) {
  if (p.min_epochs) return *p.min_epochs;
  if (p.epsilon) return min_learning_epochs(*p.epsilon, *p.alpha);
  return 0;
}

inline void validate_config(const ExperimentConfig& c) {
  if (c.horizon <= 0) throw ValidationError("horizon", "must be positive");
  if (c.replications < 1) throw ValidationError("replications", "must be at least 1");
  if (c.benchmark != "launched" && c.benchmark != "all") {
    throw ValidationError("benchmark", "must be 'launched' or 'all'");
  }
  if (c.catalog.has_value() == !c.groups.empty()) {
    throw ValidationError("catalog", "give exactly one of an explicit catalog or product groups");
  }
  if (c.catalog) {
    for (ProductId id : c.known_products) {
      if (!c.catalog->contains(id)) throw ValidationError("known_products", "unknown product id " + std::to_string(id));
    }
    for (std::size_t k = 0; k < c.catalog->size(); ++k) {
      if (c.catalog->products()[k].launch_time > c.horizon) {
        throw ValidationError("catalog.products[" + std::to_string(k) + "].launch_time",
                              "launches after the horizon");
      }
    }
  } else if (!c.known_products.empty()) {
    throw ValidationError("known_products", "only valid with an explicit catalog");
  }
  for (std::size_t g = 0; g < c.groups.size(); ++g) {
    const ProductGroup& p = c.groups[g];
    const std::string f = "groups[" + std::to_string(g) + "]";
    if (p.count < 0) throw ValidationError(f + ".count", "must be non-negative");
    if (!(p.profit_lo >= 0.0 && p.profit_lo <= p.profit_hi)) {
      throw ValidationError(f + ".profit", "need 0 <= low <= high");
    }
    if (!(p.valuation_lo >= 0.0 && p.valuation_lo <= p.valuation_hi && p.valuation_hi < 1.0)) {
      throw ValidationError(f + ".valuation", "need 0 <= low <= high < 1");
    }
    if (p.candidates != "tier1" && p.candidates != "tier2" && p.candidates != "both" &&
        p.candidates != "alternate") {
      throw ValidationError(f + ".candidates", "must be tier1, tier2, both or alternate");
    }
    if (p.launch_start < 0 || p.launch_spacing < 0) {
      throw ValidationError(f + ".launch", "launch times must be non-negative");
    }
    if (p.count > 0 && p.launch_start + (p.count - 1) * p.launch_spacing > c.horizon) {
      throw ValidationError(f + ".launch", "launches after the horizon");
    }
  }
  validate_policy(c.policy, "policy");
  for (std::size_t s = 0; s < c.scenarios.size(); ++s) {
    const Scenario& sc = c.scenarios[s];
    const std::string f = "scenarios[" + std::to_string(s) + "]";
    if (sc.label.empty()) throw ValidationError(f + ".label", "must not be empty");
    if (sc.policy) validate_policy(*sc.policy, f + ".policy");
    if (sc.valuation_support) {
      const auto [lo, hi] = *sc.valuation_support;
      if (!(lo >= 0.0 && lo <= hi && hi < 1.0)) {
        throw ValidationError(f + ".valuation_support", "need 0 <= low <= high < 1");
      }
      if (c.catalog) throw ValidationError(f + ".valuation_support", "needs generated products");
    }
  }
}

inline std::vector<Scenario> resolved_scenarios(const ExperimentConfig& c) {
  if (!c.scenarios.empty()) return c.scenarios;
  return {Scenario{c.policy.kind, c.policy, std::nullopt}};
}

// Catalog and learner knowledge for one replication of one scenario.
struct Instance {
  Catalog catalog;
  std::vector<char> known;
};

// Generated catalogs use the replication's catalog stream only, so every
// scenario of a replication sees the same profits and the same uniform draws
// behind its valuations.
inline Instance make_instance(const ExperimentConfig& c, const Scenario& scenario, int rep) {
  if (c.catalog) {
    std::vector<char> known(c.catalog->size(), 0);
    for (ProductId id : c.known_products) known[c.catalog->index_of(id)] = 1;
    return {*c.catalog, std::move(known)};
  }
  Rng rng = make_rng(c.seed, {static_cast<std::uint64_t>(rep), 1});
  std::vector<Product> products;
  std::vector<ProductId> x1;
  std::vector<ProductId> x2;
  std::vector<char> known;
  ProductId next = 1;
  for (const ProductGroup& g : c.groups) {
    double vlo = g.valuation_lo;
    double vhi = g.valuation_hi;
    if (scenario.valuation_support) std::tie(vlo, vhi) = *scenario.valuation_support;
    for (int k = 0; k < g.count; ++k) {
      const double r = uniform(rng, g.profit_lo, g.profit_hi);
      const double v = uniform(rng, vlo, vhi);
      const ProductId id = next++;
      products.push_back({id, r, v, g.launch_start + k * g.launch_spacing});
      const bool first = g.candidates == "tier1" || g.candidates == "both" ||
                         (g.candidates == "alternate" && k % 2 == 0);
      const bool second = g.candidates == "tier2" || g.candidates == "both" ||
                          (g.candidates == "alternate" && k % 2 == 1);
      if (first) x1.push_back(id);
      if (second) x2.push_back(id);
      known.push_back(g.known ? 1 : 0);
    }
  }
  return {Catalog::two_tier(std::move(products), std::move(x1), std::move(x2)), std::move(known)};
}

inline std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const Instance& inst,
                                           std::uint64_t seed, int rep) {
  if (spec.kind == "oracle") return std::make_unique<OraclePolicy>();
  if (spec.kind == "empty") return std::make_unique<EmptyPolicy>();
  if (spec.kind == "explore_then_exploit") {
    return std::make_unique<ExploreThenExploit>(inst.catalog, ExploreThenExploitOptions{spec.gamma});
  }
  Algorithm1Options o;
  o.min_epochs = resolved_min_epochs(spec);
  o.ucb_scale = spec.ucb_scale;
  o.cold_start = spec.cold_start;
  o.random_tier = spec.kind == "random_tier";
  o.known = inst.known;
  return std::make_unique<Algorithm1>(inst.catalog, std::move(o),
                                      make_rng(seed, {static_cast<std::uint64_t>(rep), 3}));
}

struct RegretTrace {
  std::vector<double> instantaneous;
  std::vector<double> cumulative;
  std::vector<double> realized;
  std::vector<TieredOffer> offers;  // empty unless recorded

  double final_regret() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

struct RunOptions {
  std::string benchmark = "launched";
  bool record_offers = true;
};

// Runs customers t = 1..horizon. A product is available from t >= launch_time.
template <std::uniform_random_bit_generator G>
RegretTrace run(const Catalog& catalog, Policy& policy, std::int64_t horizon, G& choice_rng,
                const RunOptions& options = {}) {
  const std::size_t n = catalog.size();
  const auto ids = detail::catalog_ids(catalog);
  std::vector<char> launched(n, 0);
  std::vector<char> all(n, 1);
  RegretTrace trace;
  trace.instantaneous.reserve(static_cast<std::size_t>(horizon));
  trace.cumulative.reserve(static_cast<std::size_t>(horizon));
  trace.realized.reserve(static_cast<std::size_t>(horizon));
  double best = 0.0;
  double total = 0.0;
  const bool fixed = options.benchmark == "all";
  // The benchmark offer is scored by the same evaluator as the policy's.
  auto optimum = [&](const MarketView& view) {
    const auto p = detail::launched_problem(view, catalog.valuations(), ids);
    const IndexedSolution sol = solve_two_tier_indexed(p);
    const std::vector<std::size_t> tiers[2] = {sol.tier1, sol.tier2};
    return tiered_revenue(tiers, catalog.profits(), catalog.valuations());
  };
  if (fixed) best = optimum(MarketView{catalog, all, 0});
  for (std::int64_t t = 1; t <= horizon; ++t) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!launched[i] && catalog.products()[i].launch_time <= t) {
        launched[i] = 1;
        changed = true;
      }
    }
    const MarketView view{catalog, launched, t};
    if (changed && !fixed) best = optimum(view);
    const TieredOffer offer = policy.next_offer(view);
    validate_offer(offer, catalog);
    if (offer.num_tiers() > 2) throw ValidationError("offer", "policies may use two tiers");
    const auto tiers = to_indices(offer, catalog);
    for (const auto& tier : tiers) {
      for (std::size_t i : tier) {
        if (!launched[i]) {
          throw ValidationError("offer", "product " + std::to_string(ids[i]) +
                                             " offered before launch at t=" + std::to_string(t));
        }
      }
    }
    const double value = tiered_revenue(tiers, catalog.profits(), catalog.valuations());
    double gap = best - value;
    if (gap < 0.0) {
      if (gap < -1e-9 * (1.0 + best)) {
        throw Error("offer beats the benchmark optimum at t=" + std::to_string(t));
      }
      gap = 0.0;
    }
    total += gap;
    trace.instantaneous.push_back(gap);
    trace.cumulative.push_back(total);
    const IndexedChoice choice = sample_indexed(tiers, catalog.valuations(), choice_rng);
    const ChoiceOutcome outcome = to_outcome(offer, choice);
    trace.realized.push_back(realized_profit(outcome, catalog));
    if (options.record_offers) trace.offers.push_back(offer);
    policy.observe(offer, outcome, t);
  }
  return trace;
}

// One replication of one scenario, with all streams derived from the seed.
inline RegretTrace run_replication(const ExperimentConfig& c, const Scenario& scenario, int rep) {
  const Instance inst = make_instance(c, scenario, rep);
  const PolicySpec spec = scenario.policy.value_or(c.policy);
  auto policy = make_policy(spec, inst, c.seed, rep);
  Rng choice = make_rng(c.seed, {static_cast<std::uint64_t>(rep), 2});
  return run(inst.catalog, *policy, c.horizon, choice, RunOptions{c.benchmark, c.record_offers});
}

struct ReplicationSummary {
  std::string label;
  std::vector<double> final_regrets;
  double mean_final = 0.0;
  double sd_final = 0.0;
  std::vector<double> mean_cumulative;
};

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

inline double sd_of(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

using TraceSink = std::function<void(int rep, const RegretTrace&)>;

// Runs every replication of a scenario, `threads` at a time; the sink sees
// traces in replication order. Results do not depend on the thread count.
inline ReplicationSummary replicate(const ExperimentConfig& c, const Scenario& scenario,
                                    const TraceSink& sink = {}, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  ReplicationSummary out;
  out.label = scenario.label;
  out.mean_cumulative.assign(static_cast<std::size_t>(c.horizon), 0.0);
  for (int start = 0; start < c.replications; start += static_cast<int>(threads)) {
    const int stop = std::min(c.replications, start + static_cast<int>(threads));
    std::vector<RegretTrace> batch(static_cast<std::size_t>(stop - start));
    std::vector<std::exception_ptr> errors(batch.size());
    auto work = [&](int rep) {
      try {
        batch[static_cast<std::size_t>(rep - start)] = run_replication(c, scenario, rep);
      } catch (...) {
        errors[static_cast<std::size_t>(rep - start)] = std::current_exception();
      }
    };
    if (batch.size() == 1) {
      work(start);
    } else {
      std::vector<std::thread> pool;
      for (int rep = start; rep < stop; ++rep) pool.emplace_back(work, rep);
      for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (int rep = start; rep < stop; ++rep) {
      const RegretTrace& tr = batch[static_cast<std::size_t>(rep - start)];
      out.final_regrets.push_back(tr.final_regret());
      for (std::size_t t = 0; t < tr.cumulative.size(); ++t) out.mean_cumulative[t] += tr.cumulative[t];
      if (sink) sink(rep, tr);
    }
  }
  for (double& v : out.mean_cumulative) v /= static_cast<double>(c.replications);
  out.mean_final = mean_of(out.final_regrets);
  out.sd_final = sd_of(out.final_regrets);
  return out;
}

// The three reference experiments. Values the reference setup leaves open
// (horizon, candidate membership, launch order, seed) are filled in and
// listed under provenance.
inline ExperimentConfig experiment_preset(int which) {
  ExperimentConfig c;
  c.horizon = 20000;
  c.replications = 10;
  c.seed = 20240 + static_cast<std::uint64_t>(which);
  c.record_offers = true;
  c.provenance["replications"] = "setup: 10 independent simulations";
  c.provenance["horizon"] = "chosen: left open by the setup";
  c.provenance["seed"] = "chosen";
  c.provenance["benchmark"] = "chosen: optimum over launched products, re-solved at launches";
  switch (which) {
    case 1: {
      c.name = "experiment1";
      c.groups = {
          {"initial", 80, 0.0, 1.0, 0.0, 0.1, "alternate", 0, 0, false},
          {"launched", 20, 0.0, 0.2, 0.0, 0.1, "tier2", 800, 800, false},
      };
      c.policy.kind = "algorithm1";
      c.policy.min_epochs = 100;
      for (double hi : {0.1, 0.2, 0.3, 0.5}) {
        char label[32];
        std::snprintf(label, sizeof label, "v~U[0,%.1f]", hi);
        c.scenarios.push_back({label, std::nullopt, std::make_pair(0.0, hi)});
      }
      c.provenance["groups"] =
          "setup: 80 products r~U[0,1], 20 products r~U[0,0.2], M=100, one launch every 800 "
          "steps; chosen: the 20 low-profit products are the launched ones";
      c.provenance["candidates"] = "chosen: initial products alternate between X1 and X2, launched products join X2";
      c.provenance["scenarios"] = "setup: valuation supports [0,0.1], [0,0.2], [0,0.3], [0,0.5]";
      break;
    }
    case 2: {
      c.name = "experiment2";
      c.groups = {
          {"high", 8, 0.0, 1.0, 0.0, 0.1, "alternate", 0, 0, false},
          {"low", 4, 0.0, 0.2, 0.0, 0.1, "tier2", 0, 0, false},
      };
      PolicySpec a1;
      a1.kind = "algorithm1";
      a1.min_epochs = 100;
      PolicySpec ete;
      ete.kind = "explore_then_exploit";
      ete.gamma = 30.0;
      c.policy = a1;
      c.scenarios = {{"algorithm1", a1, std::nullopt}, {"explore_then_exploit", ete, std::nullopt}};
      c.provenance["groups"] = "setup: 8 products r~U[0,1], 4 products r~U[0,0.2], v~U[0,0.1], all launched at t=0, M=100";
      c.provenance["candidates"] = "chosen: the 8 products alternate between X1 and X2, the 4 low-profit products join X2";
      c.provenance["gamma"] = "chosen: 30 (tuning parameter left open)";
      break;
    }
    case 3: {
      c.name = "experiment3";
      c.groups = {
          {"tier1", 20, 0.5, 1.0, 0.0, 0.1, "tier1", 0, 0, true},
          {"tier2", 30, 0.0, 0.6, 0.0, 0.2, "tier2", 0, 0, true},
          {"new", 15, 0.0, 0.55, 0.0, 0.3, "both", 0, 0, false},
      };
      PolicySpec a1;
      a1.kind = "algorithm1";
      a1.min_epochs = 300;
      PolicySpec rnd = a1;
      rnd.kind = "random_tier";
      c.policy = a1;
      c.scenarios = {{"algorithm1", a1, std::nullopt}, {"random_tier", rnd, std::nullopt}};
      c.provenance["groups"] =
          "setup: X1 20 products r~U[0.5,1] v~U[0,0.1]; X2 30 products r~U[0,0.6] v~U[0,0.2]; "
          "15 new products r~U[0,0.55] v~U[0,0.3] launched at t=0; M=300";
      c.provenance["known"] = "chosen: valuations of the 50 existing products are known to the learner";
      c.provenance["candidates"] = "chosen: new products are candidates for both tiers";
      break;
    }
    default:
      throw ValidationError("preset", "must be 1, 2 or 3");
  }
  return c;
}

}  // namespace smnl
