// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dyconfid/harness/config.hpp"
#include "dyconfid/harness/metrics.hpp"
#include "dyconfid/harness/trainer.hpp"

namespace dyconfid::harness {

// ---------------------------------------------------------------- summary

inline nlohmann::json summary_json(const RunArtifact& art) {
  const auto& last = art.final_epoch();
  nlohmann::json j;
  j["label"] = art.label;
  j["method"] = to_string(art.method);
  j["seed"] = art.seed;
  j["epochs"] = art.epochs.size();
  j["overall_accuracy"] = last.overall_accuracy;
  j["mean_class_accuracy"] = last.mean_class_accuracy;
  j["mean_utilization"] = art.mean_utilization();
  j["tau"] = last.tau;
  j["average_confidence"] = last.average_confidence;
  j["class_accuracy"] = last.class_accuracy;
  j["class_confidence"] = last.class_confidence;
  j["class_threshold"] = last.class_threshold;
  j["numeric_warnings"] = art.numeric_warnings;
  j["wall_seconds"] = art.wall_seconds;
  return j;
}

inline void write_summary(const RunArtifact& art, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << summary_json(art).dump(2) << '\n';
}

// ------------------------------------------------------------ correlation

/// Pearson coefficient; empty when either side has zero variance or n < 2.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct CorrelationReport {
  int epoch = 0;
  std::vector<double> confidence;  // P_c per class
  std::vector<double> accuracy;    // test accuracy per class
  std::optional<double> r;
};

inline CorrelationReport correlation_report(const EpochMetrics& m) {
  return {m.epoch, m.class_confidence, m.class_accuracy, pearson(m.class_confidence, m.class_accuracy)};
}

inline CorrelationReport correlation_report(const RunArtifact& art) { return correlation_report(art.final_epoch()); }

/// Same report rebuilt from a class_metrics.csv file (final epoch).
inline CorrelationReport correlation_report_from_csv(const std::string& class_metrics_path) {
  const auto t = read_csv(class_metrics_path);
  const auto ce = t.column("epoch"), cc = t.column("class"), cp = t.column("p_c"), ca = t.column("test_acc");
  if (t.rows.empty()) throw std::runtime_error(class_metrics_path + ": no rows");
  CorrelationReport rep;
  rep.epoch = static_cast<int>(t.number(t.rows.size() - 1, ce));
  std::map<int, std::pair<double, double>> by_class;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (static_cast<int>(t.number(i, ce)) == rep.epoch)
      by_class[static_cast<int>(t.number(i, cc))] = {t.number(i, cp), t.number(i, ca)};
  for (const auto& [c, pa] : by_class) {
    rep.confidence.push_back(pa.first);
    rep.accuracy.push_back(pa.second);
  }
  rep.r = pearson(rep.confidence, rep.accuracy);
  return rep;
}

inline void write_correlation_csv(const CorrelationReport& rep, std::ostream& out) {
  out << "class,p_c,test_acc\n";
  for (std::size_t c = 0; c < rep.confidence.size(); ++c)
    out << c << ',' << fmt(rep.confidence[c]) << ',' << fmt(rep.accuracy[c]) << '\n';
  out << "# pearson_r," << (rep.r ? fmt(*rep.r) : std::string("undefined")) << '\n';
}

// ---------------------------------------------------------------- compare

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  r.mean = mean_of(v);
  if (v.size() > 1) {
    double s = 0.0;
    for (double x : v) s += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(s / static_cast<double>(v.size() - 1));
  }
  return r;
}

struct ComparisonRow {
  std::string label;
  std::string method;
  std::size_t runs = 0;
  MeanStd overall_accuracy;
  MeanStd mean_class_accuracy;
  MeanStd utilization;
};

inline constexpr std::string_view kComparisonHeader =
    "label,method,runs,overall_acc_mean,overall_acc_std,mean_class_acc_mean,mean_class_acc_std,utilization_mean,"
    "utilization_std";

/// Aggregates finished runs that share a label.
inline ComparisonRow summarize_runs(const std::vector<RunArtifact>& runs) {
  if (runs.empty()) throw std::invalid_argument("summarize_runs: no runs");
  std::vector<double> oa, mca, util;
  for (const auto& a : runs) {
    oa.push_back(a.final_epoch().overall_accuracy);
    mca.push_back(a.final_epoch().mean_class_accuracy);
    util.push_back(a.mean_utilization());
  }
  return {runs.front().label, to_string(runs.front().method), runs.size(), mean_std(oa), mean_std(mca),
          mean_std(util)};
}

inline void write_comparison(const std::vector<ComparisonRow>& rows, std::ostream& out) {
  out << kComparisonHeader << '\n';
  for (const auto& r : rows)
    out << r.label << ',' << r.method << ',' << r.runs << ',' << fmt(r.overall_accuracy.mean) << ','
        << fmt(r.overall_accuracy.std) << ',' << fmt(r.mean_class_accuracy.mean) << ','
        << fmt(r.mean_class_accuracy.std) << ',' << fmt(r.utilization.mean) << ',' << fmt(r.utilization.std) << '\n';
}

/// Rejects config sets that would compare methods on different data.
inline void check_comparable(const std::vector<ExperimentConfig>& configs) {
  if (configs.size() < 2) throw ConfigError({"compare: at least two configs are required"});
  for (std::size_t i = 1; i < configs.size(); ++i)
    if (!(configs[i].data == configs[0].data))
      throw ConfigError({"compare: dataset spec of '" + configs[i].label + "' differs from '" + configs[0].label + "'"});
  std::map<std::string, int> seen;
  for (const auto& c : configs)
    if (++seen[c.label] > 1) throw ConfigError({"compare: duplicate label '" + c.label + "'"});
}

struct CompareHooks {
  std::function<void(const std::string& label, std::uint64_t seed)> on_run_start;
  std::function<void(const RunArtifact&)> on_run_done;
};

/// Runs every config over its seeds on one shared dataset. With an output
/// directory each run goes to <out>/<label>/seed_<s>/ and the table to
/// <out>/comparison.csv.
inline std::vector<ComparisonRow> compare(std::vector<ExperimentConfig> configs,
                                          const std::optional<std::string>& out_dir = std::nullopt,
                                          const CompareHooks& hooks = {}) {
  check_comparable(configs);
  for (auto& c : configs) validate_experiment(c);
  const Dataset data = generate(configs.front().data);
  std::vector<ComparisonRow> rows;
  for (const auto& c : configs) {
    std::vector<RunArtifact> runs;
    for (auto seed : c.seeds) {
      if (hooks.on_run_start) hooks.on_run_start(c.label, seed);
      std::optional<std::string> dir;
      if (out_dir) dir = *out_dir + "/" + c.label + "/seed_" + std::to_string(seed);
      runs.push_back(run_experiment(c, seed, data, dir));
      if (dir) write_summary(runs.back(), *dir + "/summary.json");
      if (hooks.on_run_done) hooks.on_run_done(runs.back());
    }
    rows.push_back(summarize_runs(runs));
  }
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream out(*out_dir + "/comparison.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + *out_dir + "/comparison.csv");
    write_comparison(rows, out);
  }
  return rows;
}

// ------------------------------------------------------------------ plots

/// Series extracted from one run directory's metrics files.
struct RunSeries {
  std::string name;
  std::vector<double> epoch, utilization, mean_class_accuracy, overall_accuracy;
  std::vector<double> final_threshold, final_confidence;
};

inline RunSeries load_series(const std::string& run_dir) {
  RunSeries s;
  s.name = std::filesystem::path(run_dir).filename().string();
  if (s.name.rfind("seed_", 0) == 0)
    s.name = std::filesystem::path(run_dir).parent_path().filename().string() + "/" + s.name;
  const auto m = read_csv(run_dir + "/metrics.csv");
  const auto ce = m.column("epoch"), cu = m.column("utilization"), cm = m.column("mean_class_acc"),
             co = m.column("overall_acc");
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    s.epoch.push_back(m.number(i, ce));
    s.utilization.push_back(m.number(i, cu));
    s.mean_class_accuracy.push_back(m.number(i, cm));
    s.overall_accuracy.push_back(m.number(i, co));
  }
  const auto c = read_csv(run_dir + "/class_metrics.csv");
  const auto ke = c.column("epoch"), kt = c.column("tau_c"), kp = c.column("p_c");
  if (!c.rows.empty()) {
    const double last = c.number(c.rows.size() - 1, ke);
    for (std::size_t i = 0; i < c.rows.size(); ++i)
      if (c.number(i, ke) == last) {
        s.final_threshold.push_back(c.number(i, kt));
        s.final_confidence.push_back(c.number(i, kp));
      }
  }
  return s;
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  return std::string(buf, static_cast<std::size_t>(res.ptr - buf));
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
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

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Frame {
  double w = 640, h = 400, left = 60, right = 170, top = 40, bottom = 50;
  double plot_w() const { return w - left - right; }
  double plot_h() const { return h - top - bottom; }
};

inline void open_svg(std::ostream& o, const Frame& f, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, double ymax) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.w) << "\" height=\"" << num(f.h)
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(f.w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
  const double x0 = f.left, y0 = f.top + f.plot_h();
  o << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0 + f.plot_w()) << "\" y2=\""
    << num(y0) << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(x0) << "\" y1=\"" << num(f.top) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y0)
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0, y = y0 - f.plot_h() * k / 4.0;
    o << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(y)
      << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << num(v)
      << "</text>\n";
  }
  o << "<text x=\"" << num(x0 + f.plot_w() / 2) << "\" y=\"" << num(f.h - 12) << "\" text-anchor=\"middle\">"
    << escape(xlabel) << "</text>\n";
  o << "<text x=\"16\" y=\"" << num(f.top + f.plot_h() / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num(f.top + f.plot_h() / 2) << ")\">" << escape(ylabel) << "</text>\n";
}

inline void legend(std::ostream& o, const Frame& f, const std::vector<RunSeries>& runs) {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const double y = f.top + 16.0 * static_cast<double>(i);
    const double x = f.w - f.right + 10;
    o << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"10\" height=\"10\" fill=\""
      << kPalette[i % 8] << "\"/>\n";
    o << "<text x=\"" << num(x + 14) << "\" y=\"" << num(y + 9) << "\">" << escape(runs[i].name) << "</text>\n";
  }
}

using SeriesField = std::vector<double> RunSeries::*;

inline std::string line_chart(const std::vector<RunSeries>& runs, SeriesField field, const std::string& title,
                              const std::string& ylabel) {
  Frame f;
  double xmax = 1.0;
  for (const auto& r : runs)
    if (!r.epoch.empty()) xmax = std::max(xmax, r.epoch.back());
  std::ostringstream o;
  open_svg(o, f, title, "epoch", ylabel, 1.0);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& ys = runs[i].*field;
    o << "<polyline fill=\"none\" stroke=\"" << kPalette[i % 8] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < ys.size(); ++k) {
      const double x = f.left + f.plot_w() * runs[i].epoch[k] / xmax;
      const double y = f.top + f.plot_h() * (1.0 - std::clamp(ys[k], 0.0, 1.0));
      o << (k ? " " : "") << num(x) << ',' << num(y);
    }
    o << "\"/>\n";
  }
  legend(o, f, runs);
  o << "</svg>\n";
  return o.str();
}

inline std::string bar_chart(const std::vector<RunSeries>& runs, SeriesField field, const std::string& title,
                             const std::string& ylabel) {
  Frame f;
  std::size_t classes = 0;
  for (const auto& r : runs) classes = std::max(classes, (r.*field).size());
  std::ostringstream o;
  open_svg(o, f, title, "class", ylabel, 1.0);
  if (classes > 0) {
    const double group = f.plot_w() / static_cast<double>(classes);
    const double bar = group * 0.8 / static_cast<double>(runs.size());
    for (std::size_t c = 0; c < classes; ++c) {
      const double gx = f.left + group * static_cast<double>(c);
      o << "<text x=\"" << num(gx + group / 2) << "\" y=\"" << num(f.top + f.plot_h() + 16)
        << "\" text-anchor=\"middle\">" << c << "</text>\n";
      for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& vals = runs[i].*field;
        if (c >= vals.size()) continue;
        const double hgt = f.plot_h() * std::clamp(vals[c], 0.0, 1.0);
        o << "<rect x=\"" << num(gx + group * 0.1 + bar * static_cast<double>(i)) << "\" y=\""
          << num(f.top + f.plot_h() - hgt) << "\" width=\"" << num(bar) << "\" height=\"" << num(hgt)
          << "\" fill=\"" << kPalette[i % 8] << "\"/>\n";
      }
    }
  }
  legend(o, f, runs);
  o << "</svg>\n";
  return o.str();
}

}  // namespace detail

/// Renders utilization, accuracy, final thresholds and final confidence for
/// the given run directories into `out_dir`. Returns the files written; an
/// empty run list writes nothing.
inline std::vector<std::string> emit_plots(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  if (run_dirs.empty()) return {};
  std::vector<RunSeries> runs;
  for (const auto& d : run_dirs) runs.push_back(load_series(d));
  const std::vector<std::pair<std::string, std::string>> charts = {
      {"utilization.svg", detail::line_chart(runs, &RunSeries::utilization, "Unlabeled utilization", "fraction")},
      {"accuracy.svg", detail::line_chart(runs, &RunSeries::mean_class_accuracy, "Mean class accuracy", "accuracy")},
      {"thresholds.svg", detail::bar_chart(runs, &RunSeries::final_threshold, "Final class thresholds", "tau_c")},
      {"confidence.svg", detail::bar_chart(runs, &RunSeries::final_confidence, "Final class confidence", "P_c")},
  };
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  for (const auto& [name, body] : charts) {
    const auto path = out_dir + "/" + name;
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
    written.push_back(path);
  }
  return written;
}

}  // namespace dyconfid::harness
