// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "dyconfid/data.hpp"
#include "dyconfid/model.hpp"
#include "test_support.hpp"

using namespace dyconfid;
using dyconfid::testing::random_batch;
using dyconfid::testing::random_cloud;

TEST(Model, ForwardProducesDistribution) {
  const auto m = ModelParams::initialized(5, 16, 3);
  Rng rng(1);
  const auto p = predict(m, random_cloud(rng, 32));
  ASSERT_EQ(p.size(), 5u);
  double s = 0.0;
  for (double v : p.values()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Model, PermutationInvariant) {
  const auto m = ModelParams::initialized(4, 16, 8);
  Rng rng(2);
  const auto cloud = random_cloud(rng, 24);
  std::vector<Point3> pts(cloud.points().begin(), cloud.points().end());
  std::reverse(pts.begin(), pts.end());
  std::rotate(pts.begin(), pts.begin() + 5, pts.end());
  const auto a = predict(m, cloud), b = predict(m, PointCloud(pts));
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(a[c], b[c], 1e-14);
}

TEST(Model, InitializationIsSeeded) {
  EXPECT_EQ(ModelParams::initialized(3, 8, 1), ModelParams::initialized(3, 8, 1));
  EXPECT_FALSE(ModelParams::initialized(3, 8, 1) == ModelParams::initialized(3, 8, 2));
  EXPECT_THROW(ModelParams(1, 8), std::invalid_argument);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, AnalyticMatchesCentralDifference) {
  Rng rng(static_cast<std::uint64_t>(100 + GetParam()));
  const auto model = ModelParams::initialized(4, 6, static_cast<std::uint64_t>(GetParam()));
  const auto batch = random_batch(rng, 4, 3, 2);
  const auto ls = batch.supervised_terms();
  const auto lu = batch.unsupervised_terms();
  const auto lt = batch.total_terms();
  EXPECT_LT(dyconfid::testing::gradient_relative_error(model, ls), 1e-4);
  if (!lu.empty()) {
    EXPECT_LT(dyconfid::testing::gradient_relative_error(model, lu), 1e-4);
  }
  EXPECT_LT(dyconfid::testing::gradient_relative_error(model, lt), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Batches, GradientCheck, ::testing::Range(0, 5));

TEST(Model, GradientAccumulatesAcrossCalls) {
  Rng rng(7);
  auto m = ModelParams::initialized(3, 8, 1);
  const auto cloud = random_cloud(rng, 16);
  const std::vector<LossTerm> one{{&cloud, 1, 1.0}};
  m.zero_grad();
  loss_and_gradient(m, one);
  const std::vector<double> g1(m.grads().begin(), m.grads().end());
  loss_and_gradient(m, one);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_DOUBLE_EQ(m.grads()[i], 2.0 * g1[i]);
}

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 500, 0.01, 0.0001), 0.01);
  EXPECT_DOUBLE_EQ(cosine_lr(500, 500, 0.01, 0.0001), 0.0001);
  EXPECT_NEAR(cosine_lr(250, 500, 0.01, 0.0001), 0.00505, 1e-15);
  double prev = 1.0;
  for (int e = 0; e <= 500; ++e) {
    const double lr = cosine_lr(e, 500, 0.01, 0.0001);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Sgd, MomentumUpdate) {
  ModelParams m(2, 1);
  RunConfig cfg;
  cfg.lr_initial = 0.1;
  cfg.lr_min = 0.1;
  cfg.momentum = 0.5;
  auto opt = make_optimizer(cfg, m.size());
  std::fill(m.grads().begin(), m.grads().end(), 1.0);
  sgd_step(m, opt);
  EXPECT_DOUBLE_EQ(m.values()[0], -0.1);
  sgd_step(m, opt);
  EXPECT_DOUBLE_EQ(m.values()[0], -0.1 - 0.1 * 1.5);
}

TEST(Sgd, NonFiniteGradientAborts) {
  ModelParams m(2, 1);
  auto opt = make_optimizer(RunConfig{}, m.size());
  m.grads()[2] = NAN;
  EXPECT_THROW(sgd_step(m, opt), std::domain_error);
  auto bad = make_optimizer(RunConfig{}, m.size() + 1);
  m.zero_grad();
  EXPECT_THROW(sgd_step(m, bad), std::invalid_argument);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  Checkpoint ck{ModelParams::initialized(3, 4, 9), make_optimizer(RunConfig{}, ModelParams::size_for(3, 4)), 17};
  ck.optimizer.velocity[3] = 0.125;
  const auto bytes = encode_checkpoint(ck);
  EXPECT_EQ(decode_checkpoint(bytes), ck);

  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  EXPECT_THROW(decode_checkpoint(flipped), FormatError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 9);
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  EXPECT_THROW(decode_checkpoint({}), FormatError);

  const auto path = (std::filesystem::temp_directory_path() / "dyconfid_ck_test.bin").string();
  save_checkpoint(ck, path);
  EXPECT_EQ(load_checkpoint(path), ck);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}

// Two easy classes, fully labeled: plain supervised training must fit them.
TEST(Model, SupervisedSanityReachesFullTrainAccuracy) {
  ShapeSpec sphere{Primitive::Sphere, 0.02, 0.1}, line{Primitive::Line, 0.02, 0.1};
  Rng rng(1);
  std::vector<PointCloud> clouds;
  std::vector<ClassIndex> labels;
  for (int i = 0; i < 20; ++i) {
    clouds.push_back(sample_shape(sphere, 32, rng));
    labels.push_back(0);
    clouds.push_back(sample_shape(line, 32, rng));
    labels.push_back(1);
  }
  auto m = ModelParams::initialized(2, 16, 5);
  RunConfig cfg;
  cfg.max_epochs = 200;
  cfg.lr_initial = 0.05;
  auto opt = make_optimizer(cfg, m.size());
  std::vector<LossTerm> terms;
  for (std::size_t i = 0; i < clouds.size(); ++i) terms.push_back({&clouds[i], labels[i], 1.0 / 40.0});
  int epochs_needed = -1;
  for (int e = 0; e < 200; ++e) {
    opt.epoch = e;
    m.zero_grad();
    loss_and_gradient(m, terms);
    sgd_step(m, opt);
    int correct = 0;
    for (std::size_t i = 0; i < clouds.size(); ++i) correct += predict(m, clouds[i]).argmax() == labels[i];
    if (correct == 40) {
      epochs_needed = e + 1;
      break;
    }
  }
  EXPECT_GT(epochs_needed, 0) << "never reached 100% train accuracy";
}
