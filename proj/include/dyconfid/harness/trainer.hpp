// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dyconfid/augment.hpp"
#include "dyconfid/confidence.hpp"
#include "dyconfid/data.hpp"
#include "dyconfid/harness/config.hpp"
#include "dyconfid/harness/metrics.hpp"
#include "dyconfid/model.hpp"
#include "dyconfid/pseudolabel.hpp"
#include "dyconfid/resample.hpp"

namespace dyconfid::harness {

/// Error raised inside a run, tagged with the epoch it happened in.
class RunError : public std::runtime_error {
public:
  RunError(int epoch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

private:
  int epoch_;
};

struct SamplerDump {
  int epoch = 0;
  std::string pool;
  std::map<ClassIndex, double> class_mean_weight;
};

struct RunArtifact {
  std::string label;
  Method method = Method::DyConfidMatch;
  std::uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  std::vector<SamplerDump> sampler_dumps;
  Checkpoint checkpoint;
  long numeric_warnings = 0;
  double wall_seconds = 0.0;

  const EpochMetrics& final_epoch() const {
    if (epochs.empty()) throw std::logic_error("run has no epochs");
    return epochs.back();
  }

  double mean_utilization() const {
    double s = 0.0;
    for (const auto& e : epochs) s += e.utilization;
    return epochs.empty() ? 0.0 : s / static_cast<double>(epochs.size());
  }
};

struct TrainHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
};

namespace detail {

inline constexpr std::uint64_t kModelStream = 1;
inline constexpr std::uint64_t kLabeledSamplerStream = 2;
inline constexpr std::uint64_t kUnlabeledSamplerStream = 3;
inline constexpr std::uint64_t kAugmentStream = 4;

/// Output files for one run; rows are appended and flushed every epoch.
class RunWriter {
public:
  explicit RunWriter(const std::string& dir) : dir_(dir) {
    std::filesystem::create_directories(dir);
    metrics_.open(dir + "/metrics.csv", std::ios::trunc);
    classes_.open(dir + "/class_metrics.csv", std::ios::trunc);
    sampler_.open(dir + "/sampler.csv", std::ios::trunc);
    if (!metrics_ || !classes_ || !sampler_) throw std::runtime_error("cannot create run files in " + dir);
    metrics_ << kMetricsHeader << '\n';
    classes_ << kClassMetricsHeader << '\n';
    sampler_ << "epoch,pool,class,mean_weight\n";
  }

  void epoch(const EpochMetrics& m) {
    write_metrics_row(metrics_, m);
    write_class_rows(classes_, m);
    metrics_.flush();
    classes_.flush();
  }

  void sampler(const SamplerDump& d) {
    for (const auto& [c, w] : d.class_mean_weight) sampler_ << d.epoch << ',' << d.pool << ',' << c << ',' << fmt(w) << '\n';
    sampler_.flush();
  }

  const std::string& dir() const { return dir_; }

private:
  std::string dir_;
  std::ofstream metrics_, classes_, sampler_;
};

}  // namespace detail

/// Per-class test accuracy on clean (un-augmented) clouds.
inline std::vector<double> evaluate(const ModelParams& model, const Dataset& data, std::size_t num_classes,
                                    const std::vector<std::size_t>& test_idx) {
  std::vector<long> correct(num_classes, 0), total(num_classes, 0);
  ForwardCache cache;
  for (std::size_t i : test_idx) {
    const auto& inst = data.instances[i];
    forward(model, inst.cloud(), cache);
    const auto y = static_cast<std::size_t>(inst.evaluation_label());
    ++total[y];
    if (static_cast<std::size_t>(cache.probs.argmax()) == y) ++correct[y];
  }
  std::vector<double> acc(num_classes, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c)
    if (total[c] > 0) acc[c] = static_cast<double>(correct[c]) / static_cast<double>(total[c]);
  return acc;
}

/// One full training run. Deterministic in (cfg, seed, data).
///
/// Each epoch: draw B labeled and muB unlabeled ids per step from the pool
/// samplers, weak-augment, predict pseudo-labels, select by the current class
/// thresholds, take the loss on strong views (weak views for PseudoLabel),
/// step SGD. At the end of the epoch the accumulated weak-view confidences
/// become the next epoch's thresholds. Samplers are rebuilt every R epochs.
inline RunArtifact run_experiment(const ExperimentConfig& exp_in, std::uint64_t seed, const Dataset& data,
                                  const std::optional<std::string>& out_dir = std::nullopt,
                                  const TrainHooks& hooks = {}) {
  ExperimentConfig exp = exp_in;
  validate_experiment(exp);
  if (data.spec.num_classes() != exp.data.num_classes())
    throw ConfigError({"dataset has " + std::to_string(data.spec.num_classes()) + " classes, config expects " +
                       std::to_string(exp.data.num_classes())});
  RunConfig cfg = exp.run;
  cfg.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();

  const auto C = static_cast<std::size_t>(cfg.num_classes);
  const auto B = static_cast<std::size_t>(cfg.labeled_batch);
  const auto muB = static_cast<std::size_t>(cfg.unlabeled_batch());
  const bool uses_unlabeled = exp.method != Method::SupervisedOnly;

  const auto labeled_idx = data.indices(Split::Labeled);
  const auto unlabeled_idx = data.indices(Split::Unlabeled);
  const auto test_idx = data.indices(Split::Test);
  if (labeled_idx.empty()) throw ConfigError({"dataset has no labeled instances"});
  if (uses_unlabeled && unlabeled_idx.empty()) throw ConfigError({"dataset has no unlabeled instances"});
  std::unordered_map<InstanceId, std::size_t> index_of;
  for (std::size_t i = 0; i < data.instances.size(); ++i) index_of[data.instances[i].id()] = i;

  RunArtifact art;
  art.label = exp.label;
  art.method = exp.method;
  art.seed = seed;
  std::optional<detail::RunWriter> writer;
  if (out_dir) writer.emplace(*out_dir);

  ModelParams model = ModelParams::initialized(cfg.num_classes, cfg.hidden, stream_seed(seed, detail::kModelStream));
  OptimizerState opt = make_optimizer(cfg, model.size());
  const int steps = static_cast<int>((labeled_idx.size() + B - 1) / B);

  ClassConfidenceState conf = initial_state(cfg);
  auto constant = [&](double t) { return std::vector<double>(C, t); };
  std::vector<double> thresholds;
  switch (exp.method) {
    case Method::DyConfidMatch: thresholds = cfg.pin_thresholds ? constant(cfg.fixed_tau) : conf.class_thresholds; break;
    case Method::FlexMatchStyle: thresholds = constant(0.0); break;
    default: thresholds = constant(cfg.fixed_tau); break;
  }

  // Pool descriptions for sampler builds.
  auto items_for = [&](const std::vector<std::size_t>& idx, bool labeled, bool with_predictions) {
    std::vector<SampleItem> items(idx.size());
    ForwardCache cache;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& inst = data.instances[idx[k]];
      items[k].id = inst.id();
      if (!with_predictions) {
        items[k].cls = labeled ? *inst.training_label() : 0;
        continue;
      }
      forward(model, inst.cloud(), cache);
      items[k].cls = labeled ? *inst.training_label() : cache.probs.argmax();
      items[k].confidence = cache.probs.max();
    }
    return items;
  };
  auto build_pool_sampler = [&](const std::vector<std::size_t>& idx, bool labeled, int epoch, Rng rng) {
    const bool enabled = cfg.resample_enabled && (labeled ? cfg.resample_labeled : cfg.resample_unlabeled);
    const bool needs_predictions = enabled && epoch > 0;
    auto items = items_for(idx, labeled, needs_predictions);
    if (enabled && exp.resample_kind == ResampleKind::InverseFrequency && (labeled || epoch > 0)) {
      std::vector<InstanceId> ids;
      std::vector<ClassIndex> classes;
      for (const auto& it : items) ids.push_back(it.id), classes.push_back(it.cls);
      auto s = sampler_from_weights(ids, classes, inverse_frequency_weights(classes), std::move(rng));
      s.built_at_epoch = epoch;
      s.refresh_every = cfg.resample_refresh_epochs;
      return s;
    }
    const bool confidence_weights = enabled && exp.resample_kind == ResampleKind::Confidence;
    return build_sampler(items, conf, epoch, cfg, confidence_weights, std::move(rng));
  };
  auto dump = [&](const SamplerState& s, const char* pool, int epoch) {
    SamplerDump d{epoch, pool, s.class_mean_weights()};
    if (writer) writer->sampler(d);
    art.sampler_dumps.push_back(std::move(d));
  };

  SamplerState lab_sampler =
      build_pool_sampler(labeled_idx, true, 0, Rng(stream_seed(seed, detail::kLabeledSamplerStream)));
  dump(lab_sampler, "labeled", 0);
  std::optional<SamplerState> unl_sampler;
  if (uses_unlabeled) {
    unl_sampler = build_pool_sampler(unlabeled_idx, false, 0, Rng(stream_seed(seed, detail::kUnlabeledSamplerStream)));
    dump(*unl_sampler, "unlabeled", 0);
  }

  ConfidenceAccumulator acc(cfg.num_classes);
  std::vector<ForwardCache> weak_caches(exp.method == Method::PseudoLabel ? muB : 0);
  ForwardCache cache;
  std::vector<UnlabeledPrediction> preds(muB);
  std::vector<ClassIndex> lab_labels(B);
  std::vector<ProbabilityVector> lab_probs(B);
  const double coef_s = cfg.w_s / static_cast<double>(B);
  const double coef_u = cfg.w_u / static_cast<double>(muB);
  const std::size_t slots = B + muB;

  for (int e = 0; e < cfg.max_epochs; ++e) {
    try {
      opt.epoch = e;
      if (cfg.resample_enabled && e > 0 && lab_sampler.needs_refresh(e)) {
        lab_sampler = build_pool_sampler(labeled_idx, true, e, std::move(lab_sampler.rng));
        dump(lab_sampler, "labeled", e);
        if (unl_sampler) {
          unl_sampler = build_pool_sampler(unlabeled_idx, false, e, std::move(unl_sampler->rng));
          dump(*unl_sampler, "unlabeled", e);
        }
      }

      EpochMetrics m;
      m.epoch = e;
      m.lr = opt.lr();
      m.selected_per_class.assign(C, 0);
      std::vector<long> flex_sigma(C, 0);
      double sum_ls = 0.0, sum_lu = 0.0;

      for (int step = 0; step < steps; ++step) {
        const auto step_base = (static_cast<std::uint64_t>(e) * static_cast<std::uint64_t>(steps) +
                                static_cast<std::uint64_t>(step)) * slots;
        auto view_rng = [&](std::size_t slot, std::uint64_t view) {
          return Rng(stream_seed(seed, detail::kAugmentStream, (step_base + slot) * 2 + view));
        };
        model.zero_grad();

        const auto lab_ids = draw_batch(lab_sampler, B);
        for (std::size_t b = 0; b < B; ++b) {
          const auto& inst = data.instances[index_of.at(lab_ids[b])];
          auto rng = view_rng(b, 0);
          forward(model, weak_augment(inst.cloud(), rng), cache);
          lab_labels[b] = *inst.training_label();
          backward(model, cache, lab_labels[b], coef_s);
          lab_probs[b] = cache.probs;
        }
        bool clamped = false;
        const double ls = supervised_loss(lab_labels, lab_probs, static_cast<int>(B), &clamped);
        double lu = 0.0;

        if (uses_unlabeled) {
          const auto unl_ids = draw_batch(*unl_sampler, muB);
          for (std::size_t u = 0; u < muB; ++u) {
            const auto& inst = data.instances[index_of.at(unl_ids[u])];
            auto rng = view_rng(B + u, 0);
            ForwardCache& wc = weak_caches.empty() ? cache : weak_caches[u];
            forward(model, weak_augment(inst.cloud(), rng), wc);
            preds[u] = UnlabeledPrediction(inst.id(), wc.probs);
            acc.add(preds[u]);
            if (preds[u].confidence >= cfg.fixed_tau) ++flex_sigma[static_cast<std::size_t>(preds[u].argmax_class)];
          }
          const SelectionMask mask = select_pseudo_labels(preds, thresholds);
          for (std::size_t u = 0; u < muB; ++u) {
            if (!mask.selected[u]) continue;
            ++m.selected_per_class[static_cast<std::size_t>(mask.pseudo_label[u])];
            const ForwardCache* src = nullptr;
            if (exp.method == Method::PseudoLabel) {
              src = &weak_caches[u];
            } else {
              const auto& inst = data.instances[index_of.at(unl_ids[u])];
              auto rng = view_rng(B + u, 1);
              forward(model, strong_augment(inst.cloud(), rng), cache);
              src = &cache;
            }
            const auto ce = cross_entropy(mask.pseudo_label[u], src->probs);
            clamped = clamped || ce.clamped;
            lu += ce.value;
            backward(model, *src, mask.pseudo_label[u], coef_u);
          }
          lu /= static_cast<double>(muB);
          m.selected += mask.count();
          m.unlabeled_seen += static_cast<long>(muB);
        }
        if (clamped) ++art.numeric_warnings;
        sum_ls += ls;
        sum_lu += lu;
        sgd_step(model, opt);
      }

      // Thresholds for the next epoch.
      if (uses_unlabeled) conf = acc.finalize(cfg, e + 1);
      switch (exp.method) {
        case Method::DyConfidMatch:
          thresholds = cfg.pin_thresholds ? constant(cfg.fixed_tau) : conf.class_thresholds;
          break;
        case Method::FlexMatchStyle: thresholds = flexmatch_thresholds_from_counts(flex_sigma, cfg.fixed_tau); break;
        default: break;
      }

      m.loss_supervised = sum_ls / steps;
      m.loss_unsupervised = sum_lu / steps;
      m.loss_total = total_loss(m.loss_supervised, m.loss_unsupervised, cfg.w_s, cfg.w_u);
      m.class_accuracy = evaluate(model, data, C, test_idx);
      m.mean_class_accuracy = mean_of(m.class_accuracy);
      {
        double correct = 0.0, total = 0.0;
        std::vector<long> per_class_total(C, 0);
        for (std::size_t i : test_idx) ++per_class_total[static_cast<std::size_t>(data.instances[i].evaluation_label())];
        for (std::size_t c = 0; c < C; ++c) {
          correct += m.class_accuracy[c] * static_cast<double>(per_class_total[c]);
          total += static_cast<double>(per_class_total[c]);
        }
        m.overall_accuracy = total > 0 ? correct / total : 0.0;
      }
      m.tau = conf.comprehensive_threshold;
      m.average_confidence = conf.average_confidence;
      m.class_count = conf.per_class_count;
      m.class_confidence = conf.per_class_confidence;
      m.class_threshold = thresholds;
      m.utilization = m.unlabeled_seen > 0 ? static_cast<double>(m.selected) / static_cast<double>(m.unlabeled_seen) : 0.0;

      if (writer) writer->epoch(m);
      if (hooks.on_epoch) hooks.on_epoch(m);
      art.epochs.push_back(std::move(m));
    } catch (const RunError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      throw RunError(e, ex.what());
    }
  }

  opt.epoch = cfg.max_epochs;
  art.checkpoint = Checkpoint{model, opt, cfg.max_epochs};
  art.checkpoint.params.zero_grad();
  art.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (writer) save_checkpoint(art.checkpoint, writer->dir() + "/checkpoint.bin");
  return art;
}

}  // namespace dyconfid::harness
