// smnl: offline solving, simulation, experiments and self-checks.
//
// Exit codes: 0 success, 1 invalid input or I/O failure, 2 failed check.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "smnl/config.hpp"
#include "smnl/offline_opt.hpp"
#include "smnl/report.hpp"
#include "smnl/simulator.hpp"
#include "smnl/verify.hpp"

#ifndef SMNL_FIXTURE_DIR
#define SMNL_FIXTURE_DIR "fixtures"
#endif

namespace {

using namespace smnl;

std::string join_tier(const std::vector<ProductId>& ids) {
  std::string s = "{";
  for (std::size_t k = 0; k < ids.size(); ++k) s += (k ? "," : "") + std::to_string(ids[k]);
  return s + "}";
}

std::string threshold_text(double theta) {
  return std::isinf(theta) ? std::string("none") : format_number(theta);
}

int cmd_solve(const std::string& path, bool as_json) {
  const Catalog c = load_catalog(path);
  const SolveResult r = solve_two_tier(c);
  if (as_json) {
    Json j;
    j["tier1"] = r.offer.tier(0);
    j["tier2"] = r.offer.tier(1);
    j["theta1"] = std::isinf(r.theta1()) ? Json(nullptr) : Json(r.theta1());
    j["theta2"] = std::isinf(r.theta2()) ? Json(nullptr) : Json(r.theta2());
    j["expected_profit"] = r.expected_profit;
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::printf("tier1 %s\ntier2 %s\ntheta1 %s\ntheta2 %s\nexpected_profit %.6f\n",
              join_tier(r.offer.tier(0)).c_str(), join_tier(r.offer.tier(1)).c_str(),
              threshold_text(r.theta1()).c_str(), threshold_text(r.theta2()).c_str(), r.expected_profit);
  return 0;
}

std::filesystem::path output_dir(const std::string& flag, const std::string& name) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SMNL_OUT_DIR"); env && *env) return std::filesystem::path(env) / name;
  return std::filesystem::path("out") / name;
}

int run_config(ExperimentConfig c, const std::optional<std::uint64_t>& seed, const std::optional<int>& reps,
               const std::string& out, unsigned threads, const std::string& command, bool print_only) {
  if (seed) c.seed = *seed;
  if (reps) c.replications = *reps;
  validate_config(c);
  if (print_only) {
    std::cout << config_to_json(c).dump(2) << '\n';
    return 0;
  }
  const auto dir = output_dir(out, c.name);
  const ArtifactSet a = run_and_write(c, dir, command, threads);
  for (const auto& r : a.runs) {
    std::printf("%-24s mean final regret %.3f (sd %.3f, %zu reps)\n", r.label.c_str(), r.mean_final,
                r.sd_final, r.final_regrets.size());
  }
  std::printf("wrote %zu files to %s\n", a.files.size(), dir.string().c_str());
  return 0;
}

int cmd_verify(const std::string& fixtures, double scale, std::uint64_t seed) {
  VerifyOptions o;
  o.fixtures = fixtures;
  o.ucb_scale = scale;
  o.seed = seed;
  int failed = 0;
  for (const CheckResult& r : run_verify(o)) {
    std::printf("%s %-32s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    failed += !r.passed;
  }
  if (failed) {
    std::printf("%d check(s) failed\n", failed);
    return 2;
  }
  std::printf("all checks passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiered recommendation under sequential MNL choice"};
  app.require_subcommand(1);
  std::string command;
  for (int k = 0; k < argc; ++k) command += (k ? " " : "") + std::string(argv[k]);

  std::string catalog_path;
  bool as_json = false;
  auto* solve = app.add_subcommand("solve", "Solve the two-tier offline problem for a catalog file");
  solve->add_option("catalog", catalog_path, "Catalog JSON file")->required();
  solve->add_flag("--json", as_json, "Print the result as JSON");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::string out;
  unsigned threads = 0;
  auto* simulate = app.add_subcommand("simulate", "Run an experiment config");
  simulate->add_option("config", config_path, "Experiment config JSON file")->required();
  simulate->add_option("--seed", seed, "Override the base seed");
  simulate->add_option("--reps", reps, "Override the replication count")->check(CLI::PositiveNumber);
  simulate->add_option("--out", out, "Output directory (default $SMNL_OUT_DIR/<name> or out/<name>)");
  simulate->add_option("--threads", threads, "Concurrent replications (0: hardware)");

  std::string which;
  auto* experiment = app.add_subcommand("experiment", "Run a preset (1, 2, 3) or a config file");
  experiment->add_option("which", which, "1, 2, 3 or a config path")->required();
  experiment->add_option("--seed", seed, "Override the base seed");
  experiment->add_option("--reps", reps, "Override the replication count")->check(CLI::PositiveNumber);
  experiment->add_option("--out", out, "Output directory (default $SMNL_OUT_DIR/<name> or out/<name>)");
  experiment->add_option("--threads", threads, "Concurrent replications (0: hardware)");
  bool print_config = false;
  experiment->add_flag("--print-config", print_config, "Print the resolved config and exit");

  std::string fixtures = SMNL_FIXTURE_DIR;
  double scale = kUcbScale;
  std::uint64_t verify_seed = 7;
  auto* verify = app.add_subcommand("verify", "Run the fast self-checks");
  verify->add_option("--fixtures", fixtures, "Fixture directory")->capture_default_str();
  verify->add_option("--ucb-scale", scale, "Constant in the UCB index")->capture_default_str();
  verify->add_option("--seed", verify_seed, "Seed for the randomized checks")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*solve) return cmd_solve(catalog_path, as_json);
    if (*simulate) return run_config(load_config(config_path), seed, reps, out, threads, command, false);
    if (*experiment) {
      ExperimentConfig c;
      if (which == "1" || which == "2" || which == "3") {
        c = experiment_preset(std::stoi(which));
      } else {
        c = load_config(which);
      }
      return run_config(std::move(c), seed, reps, out, threads, command, print_config);
    }
    if (*verify) return cmd_verify(fixtures, scale, verify_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
