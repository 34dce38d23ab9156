// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dyconfid/core.hpp"
#include "dyconfid/data.hpp"

namespace dyconfid::harness {

enum class Method { DyConfidMatch, FixMatch, PseudoLabel, FlexMatchStyle, SupervisedOnly };

/// Which per-instance weights a re-weighted sampler uses.
enum class ResampleKind { Confidence, InverseFrequency };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::DyConfidMatch: return "dyconfidmatch";
    case Method::FixMatch: return "fixmatch";
    case Method::PseudoLabel: return "pseudolabel";
    case Method::FlexMatchStyle: return "flexmatch";
    case Method::SupervisedOnly: return "supervised";
  }
  return "?";
}

inline const char* to_string(ResampleKind k) {
  return k == ResampleKind::Confidence ? "confidence" : "inverse_frequency";
}

struct ExperimentConfig {
  RunConfig run;
  DatasetSpec data = default_benchmark();
  Method method = Method::DyConfidMatch;
  ResampleKind resample_kind = ResampleKind::Confidence;
  std::vector<std::uint64_t> seeds{0};
  std::string label = "dyconfidmatch";
  std::string out_dir = "runs";
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    if (auto item = trim(s.substr(start, end - start)); !item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError({key + ": cannot parse '" + v + "' as a number"});
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError({key + ": expected a boolean, got '" + v + "'"});
}

template <typename T>
std::vector<T> parse_numbers(const std::string& key, const std::string& v) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(parse_number<T>(key, item));
  return out;
}

}  // namespace detail

/// Parses "name" or "name:tau" (e.g. "fixmatch:0.9"). Baselines switch off
/// confidence re-sampling; a tau suffix sets fixed mode.
inline void apply_method(ExperimentConfig& cfg, const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  if (name == "dyconfidmatch") cfg.method = Method::DyConfidMatch;
  else if (name == "fixmatch") cfg.method = Method::FixMatch;
  else if (name == "pseudolabel") cfg.method = Method::PseudoLabel;
  else if (name == "flexmatch") cfg.method = Method::FlexMatchStyle;
  else if (name == "supervised") cfg.method = Method::SupervisedOnly;
  else throw ConfigError({"method: unknown method '" + name + "'"});
  if (cfg.method != Method::DyConfidMatch) cfg.run.resample_enabled = false;
  if (colon != std::string::npos) {
    cfg.run.threshold_mode = ThresholdMode::Fixed;
    cfg.run.fixed_tau = detail::parse_number<double>("method", spec.substr(colon + 1));
  }
  cfg.label = spec;
}

/// Sets one key. Unknown keys are rejected.
inline void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  static const std::map<std::string, std::function<void(ExperimentConfig&, const std::string&, const std::string&)>>
      setters = {
          {"method", [](auto& c, auto&, auto& v) { apply_method(c, v); }},
          {"label", [](auto& c, auto&, auto& v) { c.label = v; }},
          {"out", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
          {"seeds", [](auto& c, auto& k, auto& v) { c.seeds = detail::parse_numbers<std::uint64_t>(k, v); }},
          {"train.labeled_batch", [](auto& c, auto& k, auto& v) { c.run.labeled_batch = parse_number<int>(k, v); }},
          {"train.mu", [](auto& c, auto& k, auto& v) { c.run.mu = parse_number<int>(k, v); }},
          {"train.max_epochs", [](auto& c, auto& k, auto& v) { c.run.max_epochs = parse_number<int>(k, v); }},
          {"train.threshold_mode",
           [](auto& c, auto& k, auto& v) {
             if (v == "fixed") c.run.threshold_mode = ThresholdMode::Fixed;
             else if (v == "comprehensive") c.run.threshold_mode = ThresholdMode::Comprehensive;
             else throw ConfigError({k + ": expected fixed|comprehensive"});
           }},
          {"train.tau", [](auto& c, auto& k, auto& v) { c.run.fixed_tau = parse_number<double>(k, v); }},
          {"train.mapping",
           [](auto& c, auto& k, auto& v) {
             if (v == "linear") c.run.mapping = MappingKind::Linear;
             else if (v == "concave") c.run.mapping = MappingKind::Concave;
             else if (v == "exponential") c.run.mapping = MappingKind::Exponential;
             else throw ConfigError({k + ": expected linear|concave|exponential"});
           }},
          {"train.mapping_constant", [](auto& c, auto& k, auto& v) { c.run.mapping_constant = parse_number<double>(k, v); }},
          {"train.comprehensive_constant",
           [](auto& c, auto& k, auto& v) { c.run.comprehensive_constant = parse_number<double>(k, v); }},
          {"train.pin_thresholds", [](auto& c, auto& k, auto& v) { c.run.pin_thresholds = parse_bool(k, v); }},
          {"train.resample", [](auto& c, auto& k, auto& v) { c.run.resample_enabled = parse_bool(k, v); }},
          {"train.resample_labeled", [](auto& c, auto& k, auto& v) { c.run.resample_labeled = parse_bool(k, v); }},
          {"train.resample_unlabeled", [](auto& c, auto& k, auto& v) { c.run.resample_unlabeled = parse_bool(k, v); }},
          {"train.resample_kind",
           [](auto& c, auto& k, auto& v) {
             if (v == "confidence") c.resample_kind = ResampleKind::Confidence;
             else if (v == "inverse_frequency") c.resample_kind = ResampleKind::InverseFrequency;
             else throw ConfigError({k + ": expected confidence|inverse_frequency"});
           }},
          {"train.refresh_epochs", [](auto& c, auto& k, auto& v) { c.run.resample_refresh_epochs = parse_number<int>(k, v); }},
          {"train.lr_initial", [](auto& c, auto& k, auto& v) { c.run.lr_initial = parse_number<double>(k, v); }},
          {"train.lr_min", [](auto& c, auto& k, auto& v) { c.run.lr_min = parse_number<double>(k, v); }},
          {"train.momentum", [](auto& c, auto& k, auto& v) { c.run.momentum = parse_number<double>(k, v); }},
          {"train.hidden", [](auto& c, auto& k, auto& v) { c.run.hidden = parse_number<int>(k, v); }},
          {"train.w_s", [](auto& c, auto& k, auto& v) { c.run.w_s = parse_number<double>(k, v); }},
          {"train.w_u", [](auto& c, auto& k, auto& v) { c.run.w_u = parse_number<double>(k, v); }},
          {"data.primitives",
           [](auto& c, auto&, auto& v) {
             const auto names = detail::split_list(v);
             c.data.classes.resize(names.size());
             for (std::size_t i = 0; i < names.size(); ++i) c.data.classes[i].primitive = parse_primitive(names[i]);
           }},
          {"data.noise",
           [](auto& c, auto& k, auto& v) {
             const auto xs = detail::parse_numbers<double>(k, v);
             if (xs.size() != c.data.classes.size()) throw ConfigError({k + ": one value per class"});
             for (std::size_t i = 0; i < xs.size(); ++i) c.data.classes[i].noise = xs[i];
           }},
          {"data.scale_jitter",
           [](auto& c, auto& k, auto& v) {
             const auto xs = detail::parse_numbers<double>(k, v);
             if (xs.size() != c.data.classes.size()) throw ConfigError({k + ": one value per class"});
             for (std::size_t i = 0; i < xs.size(); ++i) c.data.classes[i].scale_jitter = xs[i];
           }},
          {"data.counts", [](auto& c, auto& k, auto& v) { c.data.counts = detail::parse_numbers<int>(k, v); }},
          {"data.labeled_fraction", [](auto& c, auto& k, auto& v) { c.data.labeled_fraction = parse_number<double>(k, v); }},
          {"data.test_per_class", [](auto& c, auto& k, auto& v) { c.data.test_per_class = parse_number<int>(k, v); }},
          {"data.points", [](auto& c, auto& k, auto& v) { c.data.points_per_cloud = parse_number<int>(k, v); }},
          {"data.seed", [](auto& c, auto& k, auto& v) { c.data.seed = parse_number<std::uint64_t>(k, v); }},
      };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError({"unknown key '" + key + "'"});
  it->second(cfg, key, value);
}

/// Applies a "key=value" override.
inline void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError({"override '" + std::string(assignment) + "' is not key=value"});
  set_value(cfg, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

/// Checks the full experiment, including method/field consistency.
inline void validate_experiment(ExperimentConfig& cfg) {
  std::vector<std::string> bad;
  try {
    validate_dataset_spec(cfg.data);
  } catch (const ConfigError& e) {
    bad.insert(bad.end(), e.violations().begin(), e.violations().end());
  }
  cfg.run.num_classes = cfg.data.num_classes();
  const bool baseline = cfg.method != Method::DyConfidMatch;
  // A static-threshold baseline may use any tau in (0, 1), e.g. 0.3; the
  // (0.5, 1) bound only matters where tau also bounds the class thresholds.
  RunConfig core = cfg.run;
  if (baseline) {
    if (!(cfg.run.fixed_tau > 0.0 && cfg.run.fixed_tau < 1.0)) bad.emplace_back("fixed_tau: tau out of (0,1)");
    core.fixed_tau = 0.75;
  }
  try {
    validate_config(core);
  } catch (const ConfigError& e) {
    bad.insert(bad.end(), e.violations().begin(), e.violations().end());
  }
  if (baseline && cfg.method != Method::SupervisedOnly && cfg.run.threshold_mode != ThresholdMode::Fixed)
    bad.push_back(std::string("method: ") + to_string(cfg.method) + " requires train.threshold_mode = fixed");
  if (baseline && cfg.run.resample_enabled && cfg.resample_kind == ResampleKind::Confidence)
    bad.push_back(std::string("method: ") + to_string(cfg.method) +
                  " cannot use confidence re-sampling (set train.resample = false or resample_kind = inverse_frequency)");
  if (baseline && cfg.run.pin_thresholds) bad.emplace_back("train.pin_thresholds: only meaningful for dyconfidmatch");
  if (cfg.seeds.empty()) bad.emplace_back("seeds: at least one seed");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

/// Reads "key = value" lines; '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
  std::string line;
  int lineno = 0;
  std::vector<std::string> bad;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    try {
      apply_override(cfg, text);
    } catch (const ConfigError& e) {
      for (const auto& v : e.violations()) bad.push_back("line " + std::to_string(lineno) + ": " + v);
    }
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path});
  return parse_config(in);
}

/// Desk-scale benchmark: default dataset, 100 epochs, five seeds.
/// `method` takes the same forms as apply_method.
inline ExperimentConfig benchmark_config(const std::string& method = "dyconfidmatch") {
  ExperimentConfig c;
  c.run.max_epochs = 100;
  c.run.lr_initial = 0.2;
  c.run.resample_refresh_epochs = 10;
  c.run.threshold_mode = ThresholdMode::Comprehensive;
  c.seeds = {0, 1, 2, 3, 4};
  apply_method(c, method);
  return c;
}

}  // namespace dyconfid::harness
