// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyconfid/confidence.hpp"
#include "dyconfid/core.hpp"
#include "dyconfid/random.hpp"

namespace dyconfid {

/// Smallest raw weight an instance can have.
inline constexpr double kMinSampleWeight = 1e-6;

/// W(e) = exp(-5 (1 - e / E_max)^2).
inline double warmup(int epoch, int max_epochs) {
  if (max_epochs < 1) throw std::invalid_argument("warmup: E_max must be >= 1");
  if (epoch < 0 || epoch > max_epochs)
    throw std::out_of_range("warmup: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(max_epochs) + "]");
  const double r = 1.0 - static_cast<double>(epoch) / static_cast<double>(max_epochs);
  return std::exp(-5.0 * r * r);
}

/// Raw sampling weight: 1 - W P_c p_i when P_c > tau, else 2 - W P_c p_i.
inline double instance_weight(double class_conf, double confidence, double w, double tau) {
  const double base = class_conf > tau ? 1.0 : 2.0;
  return base - w * class_conf * confidence;
}

/// Walker/Vose alias table for O(1) categorical draws.
class AliasTable {
public:
  AliasTable() = default;

  explicit AliasTable(std::span<const double> probs) : prob_(probs.size()), alias_(probs.size()) {
    const std::size_t n = probs.size();
    if (n == 0) throw std::invalid_argument("alias table: empty distribution");
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = probs[i] * static_cast<double>(n);
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (std::size_t i : large) prob_[i] = 1.0, alias_[i] = i;
    for (std::size_t i : small) prob_[i] = 1.0, alias_[i] = i;  // rounding leftovers
  }

  std::size_t size() const { return prob_.size(); }

  std::size_t draw(Rng& rng) const {
    const auto i = static_cast<std::size_t>(rng.below(prob_.size()));
    return rng.uniform() < prob_[i] ? i : alias_[i];
  }

private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

/// What the sampler needs to know about one instance.
struct SampleItem {
  InstanceId id = 0;
  ClassIndex cls = 0;       // true class if labeled, argmax class otherwise
  double confidence = 0.0;  // p_i
};

struct SamplerState {
  std::vector<InstanceId> ids;
  std::vector<ClassIndex> classes;
  std::vector<double> weights;     // raw, in (0, 2]
  std::vector<double> normalized;  // sums to 1
  double warmup = 1.0;
  int built_at_epoch = 0;
  int refresh_every = 50;
  bool reweighted = false;
  Rng rng;
  AliasTable table;

  bool needs_refresh(int epoch) const { return epoch - built_at_epoch >= refresh_every; }

  /// Mean raw weight per class, for logging.
  std::map<ClassIndex, double> class_mean_weights() const {
    std::map<ClassIndex, double> sum;
    std::map<ClassIndex, long> n;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      sum[classes[i]] += weights[i];
      ++n[classes[i]];
    }
    for (auto& [c, s] : sum) s /= static_cast<double>(n[c]);
    return sum;
  }
};

namespace detail {

inline void finish_sampler(SamplerState& s) {
  double total = 0.0;
  for (double w : s.weights) total += w;
  if (!(total > 0.0)) throw std::logic_error("sampler: all weights are zero");
  s.normalized.resize(s.weights.size());
  for (std::size_t i = 0; i < s.weights.size(); ++i) s.normalized[i] = s.weights[i] / total;
  s.table = AliasTable(s.normalized);
}

}  // namespace detail

/// Builds a sampler for one pool. When `enabled` is false every weight is 1.
inline SamplerState build_sampler(std::span<const SampleItem> items, const ClassConfidenceState& conf,
                                  int epoch, const RunConfig& cfg, bool enabled, Rng rng) {
  if (items.empty()) throw std::invalid_argument("build_sampler: empty pool");
  SamplerState s;
  s.built_at_epoch = epoch;
  s.refresh_every = cfg.resample_refresh_epochs;
  s.reweighted = enabled;
  s.rng = std::move(rng);
  s.warmup = warmup(std::min(epoch, cfg.max_epochs), cfg.max_epochs);
  s.ids.reserve(items.size());
  s.classes.reserve(items.size());
  s.weights.reserve(items.size());
  const double tau = conf.comprehensive_threshold;
  for (const auto& it : items) {
    s.ids.push_back(it.id);
    s.classes.push_back(it.cls);
    if (!enabled) {
      s.weights.push_back(1.0);
      continue;
    }
    if (it.cls < 0 || static_cast<std::size_t>(it.cls) >= conf.num_classes())
      throw std::out_of_range("build_sampler: class index out of range");
    const double pc = conf.per_class_confidence[static_cast<std::size_t>(it.cls)];
    s.weights.push_back(std::max(kMinSampleWeight, instance_weight(pc, it.confidence, s.warmup, tau)));
  }
  detail::finish_sampler(s);
  return s;
}

/// n i.i.d. draws with replacement; advances the sampler's generator.
inline std::vector<InstanceId> draw_batch(SamplerState& s, std::size_t n) {
  if (n < 1) throw std::invalid_argument("draw_batch: n must be >= 1");
  std::vector<InstanceId> out(n);
  for (auto& id : out) id = s.ids[s.table.draw(s.rng)];
  return out;
}

/// Quantity-based baseline: each instance weighted 1 / |class|, normalized.
inline std::vector<double> inverse_frequency_weights(std::span<const ClassIndex> instance_classes) {
  std::map<ClassIndex, long> counts;
  for (ClassIndex c : instance_classes) ++counts[c];
  std::vector<double> w(instance_classes.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += (w[i] = 1.0 / static_cast<double>(counts[instance_classes[i]]));
  for (double& v : w) v /= total;
  return w;
}

/// Sampler over explicit weights (e.g. the inverse-frequency baseline).
inline SamplerState sampler_from_weights(std::span<const InstanceId> ids,
                                         std::span<const ClassIndex> classes,
                                         std::span<const double> weights, Rng rng) {
  if (ids.empty() || ids.size() != weights.size() || ids.size() != classes.size())
    throw std::invalid_argument("sampler_from_weights: size mismatch");
  SamplerState s;
  s.ids.assign(ids.begin(), ids.end());
  s.classes.assign(classes.begin(), classes.end());
  s.weights.assign(weights.begin(), weights.end());
  s.reweighted = true;
  s.rng = std::move(rng);
  detail::finish_sampler(s);
  return s;
}

}  // namespace dyconfid
