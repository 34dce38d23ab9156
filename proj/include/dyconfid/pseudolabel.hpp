// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyconfid/confidence.hpp"
#include "dyconfid/core.hpp"

namespace dyconfid {

/// Probability floor inside logarithms.
inline constexpr double kProbFloor = 1e-12;

struct SelectionMask {
  std::vector<bool> selected;
  std::vector<ClassIndex> pseudo_label;  // valid where selected

  std::size_t size() const { return selected.size(); }
  long count() const { return static_cast<long>(std::count(selected.begin(), selected.end(), true)); }
};

struct LossBreakdown {
  double supervised = 0.0;
  double unsupervised = 0.0;
  double total = 0.0;
  long selected_count = 0;
};

/// Cross-entropy of a hard label; flags when the floor was needed.
struct CrossEntropy {
  double value = 0.0;
  bool clamped = false;
};

inline CrossEntropy cross_entropy(ClassIndex y, const ProbabilityVector& q) {
  const double p = q[static_cast<std::size_t>(y)];
  if (p < kProbFloor) return {-std::log(kProbFloor), true};
  return {-std::log(p), false};
}

/// Selects i iff p_i >= threshold[c_i] (inclusive).
inline SelectionMask select_pseudo_labels(std::span<const UnlabeledPrediction> preds,
                                          std::span<const double> thresholds) {
  SelectionMask m;
  m.selected.resize(preds.size());
  m.pseudo_label.resize(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto c = static_cast<std::size_t>(preds[i].argmax_class);
    if (c >= thresholds.size()) throw std::out_of_range("select_pseudo_labels: class without threshold");
    m.pseudo_label[i] = preds[i].argmax_class;
    m.selected[i] = preds[i].confidence >= thresholds[c];
  }
  return m;
}

/// Static-threshold baseline: every class uses tau.
inline SelectionMask fixed_threshold_mask(std::span<const UnlabeledPrediction> preds, double tau,
                                          int num_classes) {
  const std::vector<double> t(static_cast<std::size_t>(num_classes), tau);
  return select_pseudo_labels(preds, t);
}

/// Masked cross-entropy averaged over the full unlabeled batch size muB.
inline double unsupervised_loss(std::span<const ProbabilityVector> strong_probs,
                                const SelectionMask& mask, int mu_b, bool* clamped = nullptr) {
  if (strong_probs.size() != mask.size() || static_cast<int>(mask.size()) != mu_b)
    throw std::invalid_argument("unsupervised_loss: size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.selected[i]) continue;
    const auto ce = cross_entropy(mask.pseudo_label[i], strong_probs[i]);
    if (ce.clamped && clamped) *clamped = true;
    sum += ce.value;
  }
  return sum / static_cast<double>(mu_b);
}

inline double supervised_loss(std::span<const ClassIndex> labels,
                              std::span<const ProbabilityVector> probs, int batch,
                              bool* clamped = nullptr) {
  if (labels.size() != probs.size() || static_cast<int>(labels.size()) != batch)
    throw std::invalid_argument("supervised_loss: size mismatch");
  double sum = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const auto ce = cross_entropy(labels[b], probs[b]);
    if (ce.clamped && clamped) *clamped = true;
    sum += ce.value;
  }
  return sum / static_cast<double>(batch);
}

inline std::vector<double> flexmatch_thresholds_from_counts(std::span<const long> sigma,
                                                            double tau_base) {
  const long top = sigma.empty() ? 0 : *std::max_element(sigma.begin(), sigma.end());
  std::vector<double> out(sigma.size(), 0.0);
  if (top == 0) return out;
  for (std::size_t c = 0; c < sigma.size(); ++c) {
    const double beta = static_cast<double>(sigma[c]) / static_cast<double>(top);
    out[c] = map_confidence(beta, MappingKind::Concave, 2.0) * tau_base;
  }
  return out;
}

/// Simplified curriculum thresholds: M(sigma_c / max sigma) * tau_base,
/// where sigma_c counts confident predictions of class c.
inline std::vector<double> flexmatch_thresholds(std::span<const UnlabeledPrediction> preds,
                                                double tau_base, int num_classes) {
  if (!(tau_base > 0.0 && tau_base < 1.0))
    throw std::invalid_argument("flexmatch_thresholds: tau_base outside (0, 1)");
  std::vector<long> sigma(static_cast<std::size_t>(num_classes), 0);
  for (const auto& p : preds) {
    if (p.argmax_class < 0 || p.argmax_class >= num_classes)
      throw std::out_of_range("flexmatch_thresholds: class index out of range");
    if (p.confidence >= tau_base) ++sigma[static_cast<std::size_t>(p.argmax_class)];
  }
  return flexmatch_thresholds_from_counts(sigma, tau_base);
}

/// Sum of squared L2 distances between aligned predictions.
inline double consistency_penalty(std::span<const ProbabilityVector> a,
                                  std::span<const ProbabilityVector> b) {
  if (a.size() != b.size()) throw std::invalid_argument("consistency_penalty: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw std::invalid_argument("consistency_penalty: class count mismatch");
    for (std::size_t c = 0; c < a[i].size(); ++c) {
      const double d = a[i][c] - b[i][c];
      sum += d * d;
    }
  }
  return sum;
}

inline double total_loss(double supervised, double unsupervised, double w_s = 1.0, double w_u = 1.0) {
  if (w_s < 0.0 || w_u < 0.0) throw std::invalid_argument("total_loss: negative weight");
  return w_s * supervised + w_u * unsupervised;
}

}  // namespace dyconfid
