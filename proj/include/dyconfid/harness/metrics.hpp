// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dyconfid::harness {

/// Everything logged for one epoch. Per-class vectors have length C.
///
/// Confidence fields describe the state finalized at the end of the epoch
/// (P_c measured during the epoch, thresholds for the next one);
/// `selected_per_class` counts pseudo-labels accepted during the epoch.
struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double loss_supervised = 0.0;
  double loss_unsupervised = 0.0;
  double loss_total = 0.0;
  double overall_accuracy = 0.0;
  double mean_class_accuracy = 0.0;
  double tau = 0.0;
  double average_confidence = 0.0;
  double utilization = 0.0;
  long unlabeled_seen = 0;
  long selected = 0;
  std::vector<double> class_accuracy;
  std::vector<long> class_count;
  std::vector<double> class_confidence;
  std::vector<double> class_threshold;
  std::vector<long> selected_per_class;
};

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, static_cast<std::size_t>(res.ptr - buf));
}

inline constexpr std::string_view kMetricsHeader =
    "epoch,lr,loss_s,loss_u,loss_total,overall_acc,mean_class_acc,tau,p_ave,utilization,unlabeled_seen,selected";
inline constexpr std::string_view kClassMetricsHeader = "epoch,class,count,p_c,tau,tau_c,selected,test_acc";

inline void write_metrics_row(std::ostream& out, const EpochMetrics& m) {
  out << m.epoch << ',' << fmt(m.lr) << ',' << fmt(m.loss_supervised) << ',' << fmt(m.loss_unsupervised) << ','
      << fmt(m.loss_total) << ',' << fmt(m.overall_accuracy) << ',' << fmt(m.mean_class_accuracy) << ','
      << fmt(m.tau) << ',' << fmt(m.average_confidence) << ',' << fmt(m.utilization) << ',' << m.unlabeled_seen
      << ',' << m.selected << '\n';
}

inline void write_class_rows(std::ostream& out, const EpochMetrics& m) {
  for (std::size_t c = 0; c < m.class_accuracy.size(); ++c)
    out << m.epoch << ',' << c << ',' << m.class_count[c] << ',' << fmt(m.class_confidence[c]) << ','
        << fmt(m.tau) << ',' << fmt(m.class_threshold[c]) << ',' << m.selected_per_class[c] << ','
        << fmt(m.class_accuracy[c]) << '\n';
}

/// Minimal CSV table: header names plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::runtime_error("missing column '" + std::string(name) + "'");
  }

  double number(std::size_t row, std::size_t col) const {
    const auto& s = rows.at(row).at(col);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{}) throw std::runtime_error("bad number '" + s + "'");
    return v;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty CSV");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) throw std::runtime_error(path + ": ragged row");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace dyconfid::harness
