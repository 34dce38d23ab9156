// SPDX-License-Identifier: Apache-2.0
// Command-line front end: generate, train, compare, report.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.
// DYCONFID_LOG=trace|debug|info|warn|error|off sets log verbosity (default info).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dyconfid/data.hpp"
#include "dyconfid/harness/config.hpp"
#include "dyconfid/harness/report.hpp"
#include "dyconfid/harness/trainer.hpp"

namespace {

using namespace dyconfid;
using namespace dyconfid::harness;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonArgs {
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> methods;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool many_configs) {
  if (many_configs)
    cmd->add_option("--config", a.configs, "Config file (repeatable)")->check(CLI::ExistingFile);
  else
    cmd->add_option("--config", a.configs, "Config file")->expected(1)->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "Run seed (overrides the config's seed list)");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--set", a.sets, "Override key=value (repeatable)");
}

ExperimentConfig build_config(const std::optional<std::string>& path, const CommonArgs& a,
                              const std::optional<std::string>& method) {
  ExperimentConfig cfg = path ? load_config(*path) : ExperimentConfig{};
  if (method) apply_method(cfg, *method);
  for (const auto& s : a.sets) apply_override(cfg, s);
  if (a.seed) cfg.seeds = {*a.seed};
  if (!a.out.empty()) cfg.out_dir = a.out;
  validate_experiment(cfg);
  return cfg;
}

void log_epoch(const EpochMetrics& m) {
  spdlog::debug("epoch {:4d} lr={:.5f} loss={:.4f} acc={:.4f} mca={:.4f} util={:.3f} tau={:.3f}", m.epoch, m.lr,
                m.loss_total, m.overall_accuracy, m.mean_class_accuracy, m.utilization, m.tau);
}

int cmd_generate(const CommonArgs& a) {
  std::optional<std::string> path;
  if (!a.configs.empty()) path = a.configs.front();
  ExperimentConfig cfg = path ? load_config(*path) : ExperimentConfig{};
  for (const auto& s : a.sets) apply_override(cfg, s);
  if (a.seed) cfg.data.seed = *a.seed;
  validate_dataset_spec(cfg.data);
  const std::string out = a.out.empty() ? cfg.out_dir : a.out;
  std::filesystem::create_directories(out);
  const Dataset data = generate(cfg.data);
  save_dataset(data, out + "/dataset.bin");
  std::ofstream txt(out + "/dataset.txt", std::ios::trunc);
  if (!txt) throw std::runtime_error("cannot write " + out + "/dataset.txt");
  export_text(data, txt);
  spdlog::info("wrote {} instances to {}/dataset.bin", data.instances.size(), out);
  return kExitOk;
}

int cmd_train(const CommonArgs& a) {
  std::optional<std::string> path;
  if (!a.configs.empty()) path = a.configs.front();
  std::optional<std::string> method;
  if (!a.methods.empty()) method = a.methods.front();
  const ExperimentConfig cfg = build_config(path, a, method);
  const Dataset data = generate(cfg.data);
  TrainHooks hooks{log_epoch};
  for (auto seed : cfg.seeds) {
    const std::string dir = cfg.out_dir + "/seed_" + std::to_string(seed);
    spdlog::info("training {} seed {} -> {}", cfg.label, seed, dir);
    const RunArtifact art = run_experiment(cfg, seed, data, dir, hooks);
    write_summary(art, dir + "/summary.json");
    std::ofstream corr(dir + "/correlation.csv", std::ios::trunc);
    write_correlation_csv(correlation_report(art), corr);
    const auto& last = art.final_epoch();
    spdlog::info("done: acc={:.4f} mca={:.4f} util={:.3f} ({:.1f}s)", last.overall_accuracy,
                 last.mean_class_accuracy, art.mean_utilization(), art.wall_seconds);
    if (art.numeric_warnings > 0) spdlog::warn("{} probabilities were clamped at the floor", art.numeric_warnings);
  }
  return kExitOk;
}

int cmd_compare(const CommonArgs& a) {
  std::vector<ExperimentConfig> configs;
  if (a.methods.empty()) {
    for (const auto& p : a.configs) configs.push_back(build_config(p, a, std::nullopt));
  } else {
    if (a.configs.size() > 1) throw ConfigError({"compare: --method takes at most one base --config"});
    std::optional<std::string> base;
    if (!a.configs.empty()) base = a.configs.front();
    for (const auto& m : a.methods) configs.push_back(build_config(base, a, m));
  }
  const std::string out = a.out.empty() ? (configs.empty() ? "runs" : configs.front().out_dir) : a.out;
  CompareHooks hooks;
  hooks.on_run_start = [](const std::string& label, std::uint64_t seed) {
    spdlog::info("run {} seed {}", label, seed);
  };
  const auto rows = compare(configs, out, hooks);
  write_comparison(rows, std::cout);
  return kExitOk;
}

int cmd_report(const CommonArgs& a, const std::vector<std::string>& run_dirs) {
  const std::string out = a.out.empty() ? "report" : a.out;
  for (const auto& d : run_dirs) {
    const auto rep = correlation_report_from_csv(d + "/class_metrics.csv");
    std::ofstream corr(d + "/correlation.csv", std::ios::trunc);
    write_correlation_csv(rep, corr);
    if (rep.r)
      std::cout << d << ": pearson r = " << harness::fmt(*rep.r) << " (epoch " << rep.epoch << ")\n";
    else
      std::cout << d << ": pearson r undefined (zero variance, epoch " << rep.epoch << ")\n";
  }
  for (const auto& f : emit_plots(run_dirs, out)) spdlog::info("wrote {}", f);
  return kExitOk;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("dyconfid");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("DYCONFID_LOG")) {
    level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; keep info instead.
    if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::info;
  }
  spdlog::set_level(level);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Dynamic class-confidence semi-supervised point-cloud classification"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, cmp_args, rep_args;
  std::vector<std::string> run_dirs;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  add_common(gen, gen_args, false);

  auto* train = app.add_subcommand("train", "Train one configuration over its seeds");
  add_common(train, train_args, false);
  train->add_option("--method", train_args.methods, "Method, e.g. dyconfidmatch or fixmatch:0.9")->expected(1);

  auto* cmp = app.add_subcommand("compare", "Run a method grid and tabulate mean/std");
  add_common(cmp, cmp_args, true);
  cmp->add_option("--method", cmp_args.methods, "Method (repeatable); applied on top of a single --config");

  auto* rep = app.add_subcommand("report", "Correlation report and SVG plots from run directories");
  add_common(rep, rep_args, false);
  rep->add_option("runs", run_dirs, "Run directories containing metrics.csv and class_metrics.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(gen_args);
    if (*train) return cmd_train(train_args);
    if (*cmp) return cmd_compare(cmp_args);
    if (*rep) return cmd_report(rep_args, run_dirs);
  } catch (const ConfigError& e) {
    for (const auto& v : e.violations()) spdlog::error("config: {}", v);
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
