// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dyconfid/core.hpp"
#include "dyconfid/random.hpp"

using namespace dyconfid;

TEST(PointCloud, RejectsTooFewPoints) {
  EXPECT_THROW(PointCloud(std::vector<Point3>(7, Point3{0, 0, 0})), std::invalid_argument);
  EXPECT_NO_THROW(PointCloud(std::vector<Point3>(8, Point3{0, 0, 0})));
}

TEST(PointCloud, RejectsNonFiniteCoordinates) {
  std::vector<Point3> pts(8, Point3{0, 0, 0});
  pts[3][1] = std::nan("");
  EXPECT_THROW(PointCloud{pts}, std::invalid_argument);
  pts[3][1] = INFINITY;
  EXPECT_THROW(PointCloud{pts}, std::invalid_argument);
}

TEST(Instance, UnlabeledHidesLabelFromTraining) {
  const PointCloud cloud(std::vector<Point3>(8, Point3{1, 2, 3}));
  const Instance lab(1, cloud, 4, Split::Labeled);
  const Instance unl(2, cloud, 5, Split::Unlabeled);
  const Instance test(3, cloud, 6, Split::Test);
  EXPECT_EQ(lab.training_label(), 4);
  EXPECT_FALSE(unl.training_label().has_value());
  EXPECT_EQ(unl.evaluation_label(), 5);
  EXPECT_EQ(test.evaluation_label(), 6);
}

TEST(ProbabilityVector, ValidatesSumAndRange) {
  EXPECT_NO_THROW(ProbabilityVector({0.2, 0.3, 0.5}));
  EXPECT_NO_THROW(ProbabilityVector({0.2, 0.3, 0.5 + 5e-7}));
  EXPECT_THROW(ProbabilityVector({0.2, 0.3, 0.6}), std::invalid_argument);
  EXPECT_THROW(ProbabilityVector({-0.1, 0.6, 0.5}), std::invalid_argument);
  EXPECT_THROW(ProbabilityVector(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(ProbabilityVector({std::nan(""), 1.0}), std::invalid_argument);
}

TEST(ProbabilityVector, ArgmaxTiesGoToLowestIndex) {
  const ProbabilityVector p({0.1, 0.45, 0.45});
  EXPECT_EQ(p.argmax(), 1);
  EXPECT_DOUBLE_EQ(p.max(), 0.45);
  const ProbabilityVector u({0.25, 0.25, 0.25, 0.25});
  EXPECT_EQ(u.argmax(), 0);
}

TEST(ProbabilityVector, SoftmaxIsStableForLargeLogits) {
  const std::vector<double> logits{1000.0, 1001.0, 999.0};
  const auto p = ProbabilityVector::from_logits(logits);
  double sum = 0.0;
  for (double v : p.values()) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-15);
  EXPECT_EQ(p.argmax(), 1);
  EXPECT_NEAR(p[1], 1.0 / (1.0 + std::exp(-1.0) + std::exp(-2.0)), 1e-15);
  EXPECT_THROW(ProbabilityVector::from_logits(std::vector<double>{1.0, INFINITY}), std::domain_error);
}

TEST(UnlabeledPrediction, DerivesArgmaxAndConfidence) {
  const UnlabeledPrediction u(42, ProbabilityVector({0.1, 0.7, 0.2}));
  EXPECT_EQ(u.instance_id, 42);
  EXPECT_EQ(u.argmax_class, 1);
  EXPECT_DOUBLE_EQ(u.confidence, 0.7);
}

TEST(RunConfig, DefaultsAreValid) {
  const RunConfig cfg;
  EXPECT_NO_THROW(validate_config(cfg));
  EXPECT_EQ(cfg.labeled_batch, 48);
  EXPECT_EQ(cfg.mu, 4);
  EXPECT_EQ(cfg.unlabeled_batch(), 192);
  EXPECT_DOUBLE_EQ(cfg.fixed_tau, 0.8);
  EXPECT_EQ(cfg.threshold_mode, ThresholdMode::Fixed);
}

TEST(RunConfig, ReportsEveryViolationByField) {
  RunConfig cfg;
  cfg.fixed_tau = 0.4;
  cfg.max_epochs = 0;
  cfg.mu = 0;
  try {
    validate_config(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    ASSERT_EQ(e.violations().size(), 3u);
    EXPECT_NE(std::string(e.what()).find("fixed_tau"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("max_epochs"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("mu"), std::string::npos);
  }
}

TEST(RunConfig, ComprehensiveModeIgnoresFixedTau) {
  RunConfig cfg;
  cfg.threshold_mode = ThresholdMode::Comprehensive;
  cfg.fixed_tau = 0.3;
  EXPECT_NO_THROW(validate_config(cfg));
}

TEST(Rng, SameSeedSameStream) {
  Rng a(7), b(7), c(8);
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_NE(a.next_u64(), c.next_u64());
}

TEST(Rng, BelowIsInRangeAndRoughlyUniform) {
  Rng r(3);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[r.below(7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, StreamSeedsAreDistinct) {
  EXPECT_NE(stream_seed(1, 1), stream_seed(1, 2));
  EXPECT_NE(stream_seed(1, 1), stream_seed(2, 1));
  EXPECT_NE(stream_seed(1, 4, 0), stream_seed(1, 4, 1));
  static_assert(stream_seed(5, 3, 2) == stream_seed(5, 3, 2));
}
