// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dyconfid {

using ClassIndex = int;
using InstanceId = std::int64_t;
using Point3 = std::array<double, 3>;

/// A set of N points in R^3. Immutable after construction.
class PointCloud {
public:
  static constexpr std::size_t kMinPoints = 8;

  PointCloud() = default;

  explicit PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.size() < kMinPoints)
      throw std::invalid_argument("point cloud needs at least 8 points, got " +
                                  std::to_string(points_.size()));
    for (const auto& p : points_)
      for (double v : p)
        if (!std::isfinite(v)) throw std::invalid_argument("point cloud has a non-finite coordinate");
  }

  std::span<const Point3> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Point3& operator[](std::size_t i) const { return points_[i]; }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

private:
  std::vector<Point3> points_;
};

enum class Split : std::uint8_t { Labeled = 0, Unlabeled = 1, Test = 2 };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Labeled: return "labeled";
    case Split::Unlabeled: return "unlabeled";
    case Split::Test: return "test";
  }
  return "?";
}

/// One dataset item. The label of an unlabeled instance is kept for
/// evaluation but is not visible through the training accessor.
class Instance {
public:
  Instance(InstanceId id, PointCloud cloud, ClassIndex label, Split split)
      : id_(id), cloud_(std::move(cloud)), label_(label), split_(split) {
    if (label < 0) throw std::invalid_argument("instance label must be non-negative");
  }

  InstanceId id() const { return id_; }
  const PointCloud& cloud() const { return cloud_; }
  Split split() const { return split_; }

  /// Label as seen by training code: empty for unlabeled instances.
  std::optional<ClassIndex> training_label() const {
    if (split_ == Split::Unlabeled) return std::nullopt;
    return label_;
  }

  /// Ground truth for metrics only.
  ClassIndex evaluation_label() const { return label_; }

  friend bool operator==(const Instance&, const Instance&) = default;

private:
  InstanceId id_;
  PointCloud cloud_;
  ClassIndex label_;
  Split split_;
};

/// Validated categorical distribution over C classes.
class ProbabilityVector {
public:
  static constexpr double kSumTolerance = 1e-6;

  ProbabilityVector() = default;

  explicit ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("probability vector is empty");
    double sum = 0.0;
    for (double p : probs_) {
      if (std::isnan(p) || p < 0.0 || p > 1.0)
        throw std::invalid_argument("probability entry outside [0, 1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      throw std::invalid_argument("probabilities sum to " + std::to_string(sum));
  }

  /// Numerically stable softmax.
  static ProbabilityVector from_logits(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("no logits");
    const double mx = *std::max_element(logits.begin(), logits.end());
    if (!std::isfinite(mx)) throw std::domain_error("non-finite logit");
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
    for (double& v : p) v /= z;
    ProbabilityVector out;
    out.probs_ = std::move(p);
    return out;
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t c) const { return probs_[c]; }
  std::span<const double> values() const { return probs_; }

  /// Index of the largest entry; ties go to the lowest index.
  ClassIndex argmax() const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs_.size(); ++c)
      if (probs_[c] > probs_[best]) best = c;
    return static_cast<ClassIndex>(best);
  }

  double max() const { return probs_[static_cast<std::size_t>(argmax())]; }

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

private:
  std::vector<double> probs_;
};

/// Weak-view prediction on one unlabeled instance.
struct UnlabeledPrediction {
  InstanceId instance_id = 0;
  ProbabilityVector probs;
  ClassIndex argmax_class = 0;
  double confidence = 0.0;

  UnlabeledPrediction() = default;
  UnlabeledPrediction(InstanceId id, ProbabilityVector p)
      : instance_id(id), probs(std::move(p)), argmax_class(probs.argmax()),
        confidence(probs[static_cast<std::size_t>(argmax_class)]) {}
};

enum class ThresholdMode { Fixed, Comprehensive };
enum class MappingKind { Linear, Concave, Exponential };

inline const char* to_string(ThresholdMode m) {
  return m == ThresholdMode::Fixed ? "fixed" : "comprehensive";
}

inline const char* to_string(MappingKind m) {
  switch (m) {
    case MappingKind::Linear: return "linear";
    case MappingKind::Concave: return "concave";
    case MappingKind::Exponential: return "exponential";
  }
  return "?";
}

/// Hyperparameters of one training run.
struct RunConfig {
  int num_classes = 8;
  int labeled_batch = 48;    // B
  int mu = 4;                // unlabeled-to-labeled ratio
  int max_epochs = 500;      // E_max
  ThresholdMode threshold_mode = ThresholdMode::Fixed;
  double fixed_tau = 0.8;
  MappingKind mapping = MappingKind::Concave;
  double mapping_constant = 2.0;        // k in x / (k - x)
  double comprehensive_constant = 2.0;  // a in exp(-a * P_ave^2)
  bool pin_thresholds = false;          // every class threshold = tau
  bool resample_enabled = true;
  bool resample_labeled = true;
  bool resample_unlabeled = true;
  int resample_refresh_epochs = 50;
  double lr_initial = 0.01;
  double lr_min = 0.0001;
  double momentum = 0.9;
  int hidden = 32;
  std::uint64_t seed = 0;
  double w_s = 1.0;
  double w_u = 1.0;

  int unlabeled_batch() const { return mu * labeled_batch; }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Thrown for invalid configuration; carries one message per violation.
class ConfigError : public std::invalid_argument {
public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

/// Returns cfg unchanged, or throws ConfigError listing every violation.
inline RunConfig validate_config(const RunConfig& cfg) {
  std::vector<std::string> bad;
  if (cfg.num_classes < 2) bad.emplace_back("num_classes: C >= 2");
  if (cfg.labeled_batch < 1) bad.emplace_back("labeled_batch: B >= 1");
  if (cfg.mu < 1) bad.emplace_back("mu: mu >= 1");
  if (cfg.max_epochs < 1) bad.emplace_back("max_epochs: E_max >= 1");
  if (cfg.threshold_mode == ThresholdMode::Fixed && !(cfg.fixed_tau > 0.5 && cfg.fixed_tau < 1.0))
    bad.emplace_back("fixed_tau: tau out of (0.5,1)");
  if (!(cfg.mapping_constant >= 1.0)) bad.emplace_back("mapping_constant: k >= 1");
  if (!(cfg.comprehensive_constant > 0.0)) bad.emplace_back("comprehensive_constant: a > 0");
  if (cfg.resample_refresh_epochs < 1) bad.emplace_back("resample_refresh_epochs: R >= 1");
  if (!(cfg.lr_min > 0.0) || !(cfg.lr_initial >= cfg.lr_min))
    bad.emplace_back("lr_initial/lr_min: 0 < lr_min <= lr_initial");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) bad.emplace_back("momentum: in [0,1)");
  if (cfg.hidden < 1) bad.emplace_back("hidden: H >= 1");
  if (!(cfg.w_s >= 0.0) || !(cfg.w_u >= 0.0)) bad.emplace_back("w_s/w_u: weights >= 0");
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return cfg;
}

}  // namespace dyconfid
