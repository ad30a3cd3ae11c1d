#pragma once

// Output artifacts: per-replication regret traces, mean curves, a summary,
// a manifest sufficient to rerun the experiment, and an SVG plot.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smnl/catalog.hpp"
#include "smnl/config.hpp"
#include "smnl/error.hpp"
#include "smnl/simulator.hpp"

namespace smnl {

inline constexpr const char* kToolVersion = "1.0.0";

// Shortest decimal that round-trips.
inline std::string format_number(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

inline std::string join_ids(const std::vector<ProductId>& ids) {
  std::string out;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (k) out += ';';
    out += std::to_string(ids[k]);
  }
  return out;
}

inline std::string xml_escape(const std::string& text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

// Quotes a CSV cell when it holds a separator or a quote.
inline std::string csv_cell(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path.string(), "cannot write file");
  return out;
}

inline void write_trace_csv(std::ostream& out, const RegretTrace& tr) {
  out << "t,instantaneous_regret,cumulative_regret,offered_tier1,offered_tier2\n";
  for (std::size_t t = 0; t < tr.cumulative.size(); ++t) {
    out << t + 1 << ',' << format_number(tr.instantaneous[t]) << ','
        << format_number(tr.cumulative[t]) << ',';
    if (t < tr.offers.size()) {
      out << join_ids(tr.offers[t].tier(0)) << ',' << join_ids(tr.offers[t].tier(1));
    } else {
      out << ',';
    }
    out << '\n';
  }
}

inline std::string trace_csv(const RegretTrace& tr) {
  std::ostringstream ss;
  write_trace_csv(ss, tr);
  return ss.str();
}

// t followed by one mean-cumulative-regret column per scenario.
inline void write_mean_csv(std::ostream& out, const std::vector<ReplicationSummary>& runs) {
  out << 't';
  for (const auto& r : runs) out << ',' << csv_cell(r.label);
  out << '\n';
  const std::size_t horizon = runs.empty() ? 0 : runs.front().mean_cumulative.size();
  for (std::size_t t = 0; t < horizon; ++t) {
    out << t + 1;
    for (const auto& r : runs) out << ',' << format_number(r.mean_cumulative[t]);
    out << '\n';
  }
}

inline Json summary_json(const ExperimentConfig& c, const std::vector<ReplicationSummary>& runs) {
  Json j;
  j["name"] = c.name;
  j["horizon"] = c.horizon;
  j["replications"] = c.replications;
  j["scenarios"] = Json::array();
  for (const auto& r : runs) {
    j["scenarios"].push_back({{"label", r.label},
                              {"mean_final_regret", r.mean_final},
                              {"sd_final_regret", r.sd_final},
                              {"final_regrets", r.final_regrets}});
  }
  return j;
}

inline std::string slug(const std::string& label) {
  std::string out;
  for (char ch : label) {
    const bool keep = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9');
    out += keep ? ch : '_';
  }
  return out;
}

inline std::string trace_file_name(const std::string& label, int rep) {
  return "trace_" + slug(label) + "_rep" + std::to_string(rep) + ".csv";
}

// Mean cumulative regret against t, one polyline per scenario.
inline std::string regret_svg(const std::string& title, const std::vector<ReplicationSummary>& runs) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const double w = 720;
  const double h = 440;
  const double left = 70;
  const double right = 170;
  const double top = 40;
  const double bottom = 50;
  std::size_t horizon = 0;
  double ymax = 0.0;
  for (const auto& r : runs) {
    horizon = std::max(horizon, r.mean_cumulative.size());
    for (double v : r.mean_cumulative) ymax = std::max(ymax, v);
  }
  if (ymax <= 0.0) ymax = 1.0;
  const double xs = horizon > 1 ? (w - left - right) / static_cast<double>(horizon - 1) : 0.0;
  const double ys = (h - top - bottom) / ymax;
  auto px = [&](std::size_t t) { return format_number(std::round((left + xs * t) * 10) / 10); };
  auto py = [&](double v) { return format_number(std::round((h - bottom - ys * v) * 10) / 10); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_number(w) +
                  "\" height=\"" + format_number(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + format_number(w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
       xml_escape(title) + "</text>\n";
  s += "<line x1=\"" + px(0) + "\" y1=\"" + py(0) + "\" x2=\"" + format_number(w - right) + "\" y2=\"" +
       py(0) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + px(0) + "\" y1=\"" + py(0) + "\" x2=\"" + px(0) + "\" y2=\"" +
       format_number(top) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    char label[32];
    std::snprintf(label, sizeof label, "%.4g", v);
    s += "<text x=\"" + format_number(left - 6) + "\" y=\"" + py(v) + "\" text-anchor=\"end\">" + label +
         "</text>\n";
  }
  s += "<text x=\"" + px(0) + "\" y=\"" + format_number(h - bottom + 18) + "\">1</text>\n";
  s += "<text x=\"" + format_number(w - right) + "\" y=\"" + format_number(h - bottom + 18) +
       "\" text-anchor=\"end\">" + std::to_string(horizon) + "</text>\n";
  s += "<text x=\"" + format_number((left + w - right) / 2) + "\" y=\"" + format_number(h - 12) +
       "\" text-anchor=\"middle\">customer t</text>\n";
  s += "<text x=\"16\" y=\"" + format_number(h / 2) + "\" transform=\"rotate(-90 16 " +
       format_number(h / 2) + ")\" text-anchor=\"middle\">mean cumulative regret</text>\n";

  const std::size_t stride = std::max<std::size_t>(1, horizon / 500);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& curve = runs[r].mean_cumulative;
    const char* color = kColors[r % 6];
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < curve.size(); t += stride) s += px(t) + "," + py(curve[t]) + " ";
    if (!curve.empty()) s += px(curve.size() - 1) + "," + py(curve.back());
    s += "\"/>\n";
    const double ly = top + 18.0 * static_cast<double>(r);
    s += "<line x1=\"" + format_number(w - right + 12) + "\" y1=\"" + format_number(ly) + "\" x2=\"" +
         format_number(w - right + 32) + "\" y2=\"" + format_number(ly) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + format_number(w - right + 38) + "\" y=\"" + format_number(ly + 4) + "\">" +
         xml_escape(runs[r].label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

struct ArtifactSet {
  std::vector<std::string> files;
  std::vector<ReplicationSummary> runs;
};

// Runs every scenario of the config and writes its artifacts under `dir`.
// Rerunning config.json from the directory reproduces every file except
// manifest.json's command line.
inline ArtifactSet run_and_write(const ExperimentConfig& c, const std::filesystem::path& dir,
                                 const std::string& command, unsigned threads = 0) {
  std::filesystem::create_directories(dir);
  ArtifactSet out;
  for (const Scenario& sc : resolved_scenarios(c)) {
    auto sink = [&](int rep, const RegretTrace& tr) {
      const std::string name = trace_file_name(sc.label, rep);
      auto f = open_output(dir / name);
      write_trace_csv(f, tr);
      out.files.push_back(name);
    };
    out.runs.push_back(replicate(c, sc, sink, threads));
  }
  {
    auto f = open_output(dir / "mean_regret.csv");
    write_mean_csv(f, out.runs);
    out.files.push_back("mean_regret.csv");
  }
  {
    auto f = open_output(dir / "summary.json");
    f << summary_json(c, out.runs).dump(2) << '\n';
    out.files.push_back("summary.json");
  }
  {
    auto f = open_output(dir / "regret.svg");
    f << regret_svg(c.name, out.runs);
    out.files.push_back("regret.svg");
  }
  {
    auto f = open_output(dir / "config.json");
    f << config_to_json(c).dump(2) << '\n';
    out.files.push_back("config.json");
  }
  Json m;
  m["tool"] = "smnl";
  m["version"] = kToolVersion;
  m["command"] = command;
  m["replay"] = "smnl simulate config.json --out <dir>";
  m["seed"] = c.seed;
  m["replications"] = c.replications;
  m["rng"] = "mt19937_64 seeded by seed_seq(seed, replication, stream); streams: 1 catalog, 2 choices, 3 policy";
  m["config"] = config_to_json(c);
  out.files.push_back("manifest.json");
  m["files"] = out.files;
  auto f = open_output(dir / "manifest.json");
  f << m.dump(2) << '\n';
  return out;
}

}  // namespace smnl
