#pragma once

// JSON catalog and experiment-config files (schema_version 1). Unknown keys
// are errors; every error names the offending field path.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smnl/catalog.hpp"
#include "smnl/error.hpp"
#include "smnl/simulator.hpp"

namespace smnl {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Parses JSON text; syntax errors report line and column.
inline Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ValidationError(source + ":" + std::to_string(line) + ":" + std::to_string(col),
                          "malformed JSON");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

// Object reader that remembers which keys were consumed.
class Fields {
 public:
  Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  const Json& raw(const std::string& key) {
    if (!has(key)) throw ValidationError(at(key), "required field is missing");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_number()) throw ValidationError(at(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_number_integer()) throw ValidationError(at(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    return has(key) ? integer(key) : fallback;
  }

  std::string text(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_string()) throw ValidationError(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    return has(key) ? text(key) : fallback;
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) throw ValidationError(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::vector<ProductId> ids(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array()) throw ValidationError(at(key), "expected an array of product ids");
    std::vector<ProductId> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number_integer()) {
        throw ValidationError(at(key) + "[" + std::to_string(k) + "]", "expected an integer id");
      }
      out.push_back(v[k].get<ProductId>());
    }
    return out;
  }

  std::pair<double, double> range(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ValidationError(at(key), "expected [low, high]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
  }

  void check_version() {
    if (has("schema_version") && integer("schema_version") != kSchemaVersion) {
      throw ValidationError(at("schema_version"),
                            "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
    }
  }

  // Throws on the first key that was never consumed.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ValidationError(at(it.key()), "unknown field");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace detail

// {"products": [{"id", "profit", "valuation", "launch_time"?}], "candidates_tier1": [...],
//  "candidates_tier2": [...]}
inline Catalog catalog_from_json(const Json& j, const std::string& path = "") {
  detail::Fields f(j, path);
  f.check_version();
  const Json& list = f.raw("products");
  if (!list.is_array()) throw ValidationError(f.at("products"), "expected an array");
  std::vector<Product> products;
  for (std::size_t k = 0; k < list.size(); ++k) {
    detail::Fields p(list[k], f.at("products") + "[" + std::to_string(k) + "]");
    Product prod;
    prod.id = p.integer("id");
    prod.profit = p.number("profit");
    prod.valuation = p.number("valuation");
    prod.launch_time = p.integer("launch_time", 0);
    p.finish();
    products.push_back(prod);
  }
  std::vector<ProductId> x1 = f.ids("candidates_tier1");
  std::vector<ProductId> x2 = f.ids("candidates_tier2");
  f.finish();
  try {
    return Catalog::two_tier(std::move(products), std::move(x1), std::move(x2));
  } catch (const ValidationError& e) {
    const std::string field = path.empty() ? e.field() : path + "." + e.field();
    throw ValidationError(field, std::string(e.what()).substr(e.field().size() + 2));
  }
}

inline Json catalog_to_json(const Catalog& c) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["products"] = Json::array();
  for (const Product& p : c.products()) {
    j["products"].push_back(
        {{"id", p.id}, {"profit", p.profit}, {"valuation", p.valuation}, {"launch_time", p.launch_time}});
  }
  j["candidates_tier1"] = c.candidates(0);
  j["candidates_tier2"] = c.candidates(1);
  return j;
}

inline Catalog load_catalog(const std::string& path) {
  return catalog_from_json(parse_json(read_file(path), path));
}

inline PolicySpec policy_from_json(const Json& j, const std::string& path) {
  detail::Fields f(j, path);
  PolicySpec p;
  p.kind = f.text("kind");
  if (f.has("min_epochs")) p.min_epochs = f.integer("min_epochs");
  if (f.has("epsilon")) p.epsilon = f.number("epsilon");
  if (f.has("alpha")) p.alpha = f.number("alpha");
  p.gamma = f.number("gamma", p.gamma);
  p.ucb_scale = f.number("ucb_scale", p.ucb_scale);
  p.cold_start = f.number("cold_start", p.cold_start);
  f.finish();
  validate_policy(p, path);
  return p;
}

inline Json policy_to_json(const PolicySpec& p) {
  Json j;
  j["kind"] = p.kind;
  if (p.min_epochs) j["min_epochs"] = *p.min_epochs;
  if (p.epsilon) j["epsilon"] = *p.epsilon;
  if (p.alpha) j["alpha"] = *p.alpha;
  j["gamma"] = p.gamma;
  j["ucb_scale"] = p.ucb_scale;
  j["cold_start"] = p.cold_start;
  return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
  detail::Fields f(j, "");
  f.check_version();
  ExperimentConfig c;
  c.name = f.text("name", c.name);
  c.horizon = f.integer("horizon");
  const std::int64_t seed = f.integer("seed", static_cast<std::int64_t>(c.seed));
  if (seed < 0) throw ValidationError("seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.replications = static_cast<int>(f.integer("replications", c.replications));
  c.benchmark = f.text("benchmark", c.benchmark);
  c.record_offers = f.flag("record_offers", c.record_offers);
  if (f.has("catalog")) c.catalog = catalog_from_json(f.raw("catalog"), "catalog");
  if (f.has("known_products")) c.known_products = f.ids("known_products");
  if (f.has("groups")) {
    const Json& groups = f.raw("groups");
    if (!groups.is_array()) throw ValidationError("groups", "expected an array");
    for (std::size_t k = 0; k < groups.size(); ++k) {
      detail::Fields g(groups[k], "groups[" + std::to_string(k) + "]");
      ProductGroup pg;
      pg.name = g.text("name", "group" + std::to_string(k + 1));
      pg.count = static_cast<int>(g.integer("count"));
      std::tie(pg.profit_lo, pg.profit_hi) = g.range("profit");
      std::tie(pg.valuation_lo, pg.valuation_hi) = g.range("valuation");
      pg.candidates = g.text("candidates", pg.candidates);
      pg.launch_start = g.integer("launch_start", 0);
      pg.launch_spacing = g.integer("launch_spacing", 0);
      pg.known = g.flag("known", false);
      g.finish();
      c.groups.push_back(pg);
    }
  }
  c.policy = policy_from_json(f.raw("policy"), "policy");
  if (f.has("scenarios")) {
    const Json& list = f.raw("scenarios");
    if (!list.is_array()) throw ValidationError("scenarios", "expected an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string at = "scenarios[" + std::to_string(k) + "]";
      detail::Fields s(list[k], at);
      Scenario sc;
      sc.label = s.text("label");
      if (s.has("policy")) sc.policy = policy_from_json(s.raw("policy"), at + ".policy");
      if (s.has("valuation_support")) sc.valuation_support = s.range("valuation_support");
      s.finish();
      c.scenarios.push_back(sc);
    }
  }
  if (f.has("provenance")) {
    const Json& prov = f.raw("provenance");
    if (!prov.is_object()) throw ValidationError("provenance", "expected an object of strings");
    for (auto it = prov.begin(); it != prov.end(); ++it) {
      if (!it.value().is_string()) throw ValidationError("provenance." + it.key(), "expected a string");
      c.provenance[it.key()] = it.value().get<std::string>();
    }
  }
  f.finish();
  validate_config(c);
  return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = c.name;
  j["horizon"] = c.horizon;
  j["seed"] = c.seed;
  j["replications"] = c.replications;
  j["benchmark"] = c.benchmark;
  j["record_offers"] = c.record_offers;
  if (c.catalog) {
    Json cat = catalog_to_json(*c.catalog);
    cat.erase("schema_version");
    j["catalog"] = cat;
    j["known_products"] = c.known_products;
  }
  if (!c.groups.empty()) {
    j["groups"] = Json::array();
    for (const ProductGroup& g : c.groups) {
      j["groups"].push_back({{"name", g.name},
                             {"count", g.count},
                             {"profit", {g.profit_lo, g.profit_hi}},
                             {"valuation", {g.valuation_lo, g.valuation_hi}},
                             {"candidates", g.candidates},
                             {"launch_start", g.launch_start},
                             {"launch_spacing", g.launch_spacing},
                             {"known", g.known}});
    }
  }
  j["policy"] = policy_to_json(c.policy);
  if (!c.scenarios.empty()) {
    j["scenarios"] = Json::array();
    for (const Scenario& s : c.scenarios) {
      Json sj;
      sj["label"] = s.label;
      if (s.policy) sj["policy"] = policy_to_json(*s.policy);
      if (s.valuation_support) {
        sj["valuation_support"] = {s.valuation_support->first, s.valuation_support->second};
      }
      j["scenarios"].push_back(sj);
    }
  }
  if (!c.provenance.empty()) {
    j["provenance"] = Json::object();
    for (const auto& [k, v] : c.provenance) j["provenance"][k] = v;
  }
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  return config_from_json(parse_json(read_file(path), path));
}

}  // namespace smnl
