// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <vector>

#include "dyconfid/confidence.hpp"
#include "dyconfid/resample.hpp"
#include "oracle_tables.hpp"
#include "test_support.hpp"

using namespace dyconfid;
using dyconfid::testing::rel_error;

TEST(Warmup, MatchesOracle) {
  for (const auto& r : oracle::kWarmupRows)
    EXPECT_LE(rel_error(warmup(r.epoch, r.max_epochs), r.expected), 1e-9) << r.epoch << "/" << r.max_epochs;
}

TEST(Warmup, MonotoneAndBounded) {
  double prev = 0.0;
  for (int e = 0; e <= 500; ++e) {
    const double w = warmup(e, 500);
    EXPECT_GE(w, prev);
    EXPECT_GT(w, 0.0);
    EXPECT_LE(w, 1.0);
    prev = w;
  }
  EXPECT_EQ(warmup(500, 500), 1.0);
}

TEST(Warmup, RejectsBadEpochs) {
  EXPECT_THROW(warmup(501, 500), std::out_of_range);
  EXPECT_THROW(warmup(-1, 500), std::out_of_range);
  EXPECT_THROW(warmup(0, 0), std::invalid_argument);
}

TEST(InstanceWeight, MatchesOracle) {
  for (const auto& r : oracle::kWeightRows)
    EXPECT_LE(rel_error(instance_weight(r.class_conf, r.confidence, r.w, r.tau), r.expected), 1e-9);
}

TEST(InstanceWeight, BranchBoundaryIsStrict) {
  // P_c == tau takes the lower-confidence branch.
  EXPECT_DOUBLE_EQ(instance_weight(0.8, 0.5, 1.0, 0.8), 2.0 - 0.4);
  EXPECT_DOUBLE_EQ(instance_weight(0.8000001, 0.5, 1.0, 0.8), 1.0 - 0.40000005);
}

TEST(AliasTable, ExactForDyadicWeights) {
  const std::vector<double> p{0.5, 0.25, 0.125, 0.125};
  const AliasTable t(p);
  Rng rng(4);
  std::vector<int> h(4, 0);
  const int n = 400000;
  for (int i = 0; i < n; ++i) ++h[t.draw(rng)];
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(h[i] / double(n), p[i], 0.005);
  EXPECT_THROW(AliasTable(std::vector<double>{}), std::invalid_argument);
}

TEST(AliasTable, ZeroWeightNeverDrawn) {
  const std::vector<double> p{0.0, 0.7, 0.0, 0.3};
  const AliasTable t(p);
  Rng rng(2);
  for (int i = 0; i < 100000; ++i) {
    const auto k = t.draw(rng);
    EXPECT_TRUE(k == 1 || k == 3);
  }
}

namespace {

ClassConfidenceState state_with(std::vector<double> conf, double tau) {
  ClassConfidenceState s;
  s.per_class_confidence = std::move(conf);
  s.per_class_count.assign(s.per_class_confidence.size(), 1);
  s.comprehensive_threshold = tau;
  s.class_thresholds.assign(s.per_class_confidence.size(), tau);
  return s;
}

}  // namespace

TEST(BuildSampler, FavoursLowConfidenceClasses) {
  RunConfig cfg;
  cfg.max_epochs = 100;
  const auto conf = state_with({0.95, 0.4}, 0.8);
  std::vector<SampleItem> items;
  for (int i = 0; i < 10; ++i) items.push_back({i, 0, 0.95});
  for (int i = 10; i < 20; ++i) items.push_back({i, 1, 0.4});
  const auto s = build_sampler(items, conf, 100, cfg, true, Rng(1));
  EXPECT_EQ(s.warmup, 1.0);
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0 - 0.95 * 0.95);
  EXPECT_DOUBLE_EQ(s.weights[10], 2.0 - 0.4 * 0.4);
  double total = 0.0;
  for (double w : s.normalized) total += w;
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto means = s.class_mean_weights();
  EXPECT_GT(means.at(1), means.at(0));
}

TEST(BuildSampler, DisabledIsUniform) {
  RunConfig cfg;
  const auto conf = state_with({0.95, 0.4}, 0.8);
  const std::vector<SampleItem> items{{0, 0, 0.99}, {1, 1, 0.2}, {2, 1, 0.3}};
  const auto s = build_sampler(items, conf, 10, cfg, false, Rng(1));
  for (double w : s.normalized) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
  EXPECT_FALSE(s.reweighted);
}

TEST(BuildSampler, WeightFloorKeepsEveryInstanceDrawable) {
  RunConfig cfg;
  cfg.max_epochs = 10;
  const auto conf = state_with({1.0}, 0.8);
  const std::vector<SampleItem> items{{0, 0, 1.0}, {1, 0, 0.5}};
  const auto s = build_sampler(items, conf, 10, cfg, true, Rng(1));
  EXPECT_EQ(s.weights[0], kMinSampleWeight);
  EXPECT_GT(s.normalized[0], 0.0);
}

TEST(BuildSampler, ErrorsOnEmptyPoolAndBadClass) {
  RunConfig cfg;
  const auto conf = state_with({0.5}, 0.8);
  EXPECT_THROW(build_sampler(std::vector<SampleItem>{}, conf, 0, cfg, true, Rng(1)), std::invalid_argument);
  const std::vector<SampleItem> bad{{0, 3, 0.5}};
  EXPECT_THROW(build_sampler(bad, conf, 0, cfg, true, Rng(1)), std::out_of_range);
}

TEST(BuildSampler, RefreshSchedule) {
  RunConfig cfg;
  cfg.resample_refresh_epochs = 50;
  const auto conf = state_with({0.5}, 0.8);
  const std::vector<SampleItem> items{{0, 0, 0.5}};
  const auto s = build_sampler(items, conf, 0, cfg, true, Rng(1));
  EXPECT_FALSE(s.needs_refresh(49));
  EXPECT_TRUE(s.needs_refresh(50));
}

TEST(DrawBatch, DeterministicAndWithReplacement) {
  RunConfig cfg;
  const auto conf = state_with({0.5, 0.5}, 0.8);
  const std::vector<SampleItem> items{{10, 0, 0.5}, {11, 1, 0.5}};
  auto a = build_sampler(items, conf, 0, cfg, true, Rng(9));
  auto b = build_sampler(items, conf, 0, cfg, true, Rng(9));
  const auto da = draw_batch(a, 64);
  EXPECT_EQ(da, draw_batch(b, 64));
  EXPECT_EQ(da.size(), 64u);
  EXPECT_THROW(draw_batch(a, 0), std::invalid_argument);
}

TEST(InverseFrequency, EqualClassMass) {
  const std::vector<ClassIndex> cls{0, 0, 0, 1};
  const auto w = inverse_frequency_weights(cls);
  EXPECT_DOUBLE_EQ(w[0] + w[1] + w[2], 0.5);
  EXPECT_DOUBLE_EQ(w[3], 0.5);
  const std::vector<InstanceId> ids{0, 1, 2, 3};
  auto s = sampler_from_weights(ids, cls, w, Rng(3));
  std::map<InstanceId, int> h;
  for (auto id : draw_batch(s, 100000)) ++h[id];
  EXPECT_NEAR(h[3] / 100000.0, 0.5, 0.01);
  EXPECT_THROW(sampler_from_weights(ids, cls, std::vector<double>{1.0}, Rng(3)), std::invalid_argument);
}
