// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyconfid/core.hpp"

namespace dyconfid {

/// Learning-status snapshot for one epoch.
struct ClassConfidenceState {
  int epoch = 0;
  std::vector<double> per_class_confidence;  // P_c, 0 for unobserved classes
  std::vector<long> per_class_count;         // |C_c|
  double average_confidence = 0.0;           // P_ave over observed classes
  double comprehensive_threshold = 1.0;      // tau
  std::vector<double> class_thresholds;      // tau_e(c)

  std::size_t num_classes() const { return per_class_confidence.size(); }
  double lower_bound() const { return std::min(comprehensive_threshold, 1.0 - comprehensive_threshold); }
  double upper_bound() const { return std::max(comprehensive_threshold, 1.0 - comprehensive_threshold); }

  friend bool operator==(const ClassConfidenceState&, const ClassConfidenceState&) = default;
};

/// Groups prediction indices by argmax class.
inline std::vector<std::vector<std::size_t>> partition_by_argmax(
    std::span<const UnlabeledPrediction> preds, int num_classes) {
  std::vector<std::vector<std::size_t>> sets(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const ClassIndex c = preds[i].argmax_class;
    if (c < 0 || c >= num_classes)
      throw std::out_of_range("argmax class " + std::to_string(c) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    sets[static_cast<std::size_t>(c)].push_back(i);
  }
  return sets;
}

/// Mean max-probability per argmax class; empty classes get 0.
inline std::vector<double> class_confidence(const std::vector<std::vector<std::size_t>>& partition,
                                            std::span<const UnlabeledPrediction> preds) {
  std::vector<double> out(partition.size(), 0.0);
  for (std::size_t c = 0; c < partition.size(); ++c) {
    if (partition[c].empty()) continue;
    double sum = 0.0;
    for (std::size_t i : partition[c]) sum += preds[i].confidence;
    out[c] = sum / static_cast<double>(partition[c].size());
  }
  return out;
}

/// Learning-status mapping M(x) on [0, 1].
///
/// Concave: min(1, x / (k - x)); k = 2 gives x / (2 - x).
/// Linear: x. Exponential: exp(-5 (1 - x)^2).
inline double map_confidence(double x, MappingKind mapping, double k = 2.0) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("map_confidence: x outside [0, 1]");
  switch (mapping) {
    case MappingKind::Linear: return x;
    case MappingKind::Exponential: return std::exp(-5.0 * (1.0 - x) * (1.0 - x));
    case MappingKind::Concave: {
      if (!(k >= 1.0)) throw std::domain_error("map_confidence: k must be >= 1");
      const double denom = k - x;
      if (denom <= x) return 1.0;  // also covers denom == 0 at k = x = 1
      return x / denom;
    }
  }
  throw std::logic_error("unknown mapping");
}

/// Global threshold tau. Comprehensive mode: exp(-a * P_ave^2).
inline double comprehensive_threshold(double average_confidence, ThresholdMode mode,
                                      double a = 2.0, double fixed_tau = 0.8) {
  if (mode == ThresholdMode::Fixed) return fixed_tau;
  return std::exp(-a * average_confidence * average_confidence);
}

/// Per-class thresholds: M(P_c) clamped to [min(tau, 1-tau), max(tau, 1-tau)].
inline std::vector<double> class_thresholds(std::span<const double> class_conf, double tau,
                                            MappingKind mapping, double k = 2.0) {
  const double lo = std::min(tau, 1.0 - tau);
  const double hi = std::max(tau, 1.0 - tau);
  std::vector<double> out(class_conf.size());
  for (std::size_t c = 0; c < class_conf.size(); ++c)
    out[c] = std::clamp(map_confidence(class_conf[c], mapping, k), lo, hi);
  return out;
}

namespace detail {

inline ClassConfidenceState finalize_state(std::vector<double> conf, std::vector<long> counts,
                                           const RunConfig& cfg, int epoch) {
  ClassConfidenceState s;
  s.epoch = epoch;
  double sum = 0.0;
  long observed = 0;
  for (std::size_t c = 0; c < conf.size(); ++c)
    if (counts[c] > 0) {
      sum += conf[c];
      ++observed;
    }
  s.average_confidence = observed > 0 ? sum / static_cast<double>(observed) : 0.0;
  s.comprehensive_threshold = comprehensive_threshold(s.average_confidence, cfg.threshold_mode,
                                                      cfg.comprehensive_constant, cfg.fixed_tau);
  s.class_thresholds = class_thresholds(conf, s.comprehensive_threshold, cfg.mapping,
                                        cfg.mapping_constant);
  s.per_class_confidence = std::move(conf);
  s.per_class_count = std::move(counts);
  return s;
}

}  // namespace detail

/// Confidence state from a full set of epoch predictions.
inline ClassConfidenceState update_state(std::span<const UnlabeledPrediction> preds,
                                         const RunConfig& cfg, int epoch) {
  if (preds.empty()) throw std::invalid_argument("update_state: no predictions");
  const auto part = partition_by_argmax(preds, cfg.num_classes);
  std::vector<long> counts(part.size());
  for (std::size_t c = 0; c < part.size(); ++c) counts[c] = static_cast<long>(part[c].size());
  return detail::finalize_state(class_confidence(part, preds), std::move(counts), cfg, epoch);
}

/// State before any statistics exist: every class at the floor threshold.
inline ClassConfidenceState initial_state(const RunConfig& cfg) {
  const auto C = static_cast<std::size_t>(cfg.num_classes);
  ClassConfidenceState s;
  s.epoch = 0;
  s.per_class_confidence.assign(C, 0.0);
  s.per_class_count.assign(C, 0);
  s.average_confidence = 0.0;
  s.comprehensive_threshold = comprehensive_threshold(0.0, cfg.threshold_mode,
                                                      cfg.comprehensive_constant, cfg.fixed_tau);
  s.class_thresholds.assign(C, s.lower_bound());
  return s;
}

/// Running per-class sum/count of weak-view confidences within one epoch.
/// Single writer.
class ConfidenceAccumulator {
public:
  explicit ConfidenceAccumulator(int num_classes)
      : sums_(static_cast<std::size_t>(num_classes), 0.0),
        counts_(static_cast<std::size_t>(num_classes), 0) {}

  void add(const UnlabeledPrediction& p) {
    if (p.argmax_class < 0 || static_cast<std::size_t>(p.argmax_class) >= sums_.size())
      throw std::out_of_range("accumulator: class index out of range");
    sums_[static_cast<std::size_t>(p.argmax_class)] += p.confidence;
    ++counts_[static_cast<std::size_t>(p.argmax_class)];
  }

  long total() const {
    long n = 0;
    for (long c : counts_) n += c;
    return n;
  }

  /// Finalizes the state for `epoch` and resets the accumulator.
  ClassConfidenceState finalize(const RunConfig& cfg, int epoch) {
    if (total() == 0) throw std::invalid_argument("accumulator: no predictions this epoch");
    std::vector<double> conf(sums_.size(), 0.0);
    for (std::size_t c = 0; c < sums_.size(); ++c)
      if (counts_[c] > 0) conf[c] = sums_[c] / static_cast<double>(counts_[c]);
    auto state = detail::finalize_state(std::move(conf), counts_, cfg, epoch);
    std::fill(sums_.begin(), sums_.end(), 0.0);
    std::fill(counts_.begin(), counts_.end(), 0);
    return state;
  }

private:
  std::vector<double> sums_;
  std::vector<long> counts_;
};

}  // namespace dyconfid
