// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dyconfid/pseudolabel.hpp"
#include "test_support.hpp"

using namespace dyconfid;

namespace {

UnlabeledPrediction pred(InstanceId id, std::vector<double> p) { return {id, ProbabilityVector(std::move(p))}; }

}  // namespace

TEST(SelectPseudoLabels, InclusiveAtThreshold) {
  const std::vector<UnlabeledPrediction> preds{pred(0, {0.8, 0.2}), pred(1, {0.3, 0.7}), pred(2, {0.79, 0.21})};
  const std::vector<double> t{0.8, 0.5};
  const auto m = select_pseudo_labels(preds, t);
  EXPECT_TRUE(m.selected[0]);
  EXPECT_TRUE(m.selected[1]);
  EXPECT_FALSE(m.selected[2]);
  EXPECT_EQ(m.pseudo_label[1], 1);
  EXPECT_EQ(m.count(), 2);
}

TEST(SelectPseudoLabels, MissingThresholdThrows) {
  const std::vector<UnlabeledPrediction> preds{pred(0, {0.1, 0.1, 0.8})};
  const std::vector<double> t{0.5, 0.5};
  EXPECT_THROW(select_pseudo_labels(preds, t), std::out_of_range);
}

TEST(SelectPseudoLabels, ZeroThresholdSelectsAll) {
  Rng rng(1);
  std::vector<UnlabeledPrediction> preds;
  for (int i = 0; i < 50; ++i) preds.emplace_back(i, dyconfid::testing::random_probs(rng, 5));
  EXPECT_EQ(fixed_threshold_mask(preds, 0.0, 5).count(), 50);
  EXPECT_EQ(fixed_threshold_mask(preds, 1.0 + 1e-9, 5).count(), 0);
}

TEST(Losses, UnsupervisedAveragesOverFullBatch) {
  const std::vector<ProbabilityVector> strong{ProbabilityVector({0.5, 0.5}), ProbabilityVector({0.25, 0.75}),
                                              ProbabilityVector({0.9, 0.1}), ProbabilityVector({0.6, 0.4})};
  SelectionMask m;
  m.selected = {true, true, false, false};
  m.pseudo_label = {0, 1, 0, 0};
  const double expected = (-std::log(0.5) - std::log(0.75)) / 4.0;
  EXPECT_DOUBLE_EQ(unsupervised_loss(strong, m, 4), expected);
  m.selected = {false, false, false, false};
  EXPECT_EQ(unsupervised_loss(strong, m, 4), 0.0);
  EXPECT_THROW(unsupervised_loss(strong, m, 5), std::invalid_argument);
}

TEST(Losses, SupervisedMean) {
  const std::vector<ClassIndex> y{0, 1};
  const std::vector<ProbabilityVector> q{ProbabilityVector({0.5, 0.5}), ProbabilityVector({0.2, 0.8})};
  EXPECT_DOUBLE_EQ(supervised_loss(y, q, 2), (-std::log(0.5) - std::log(0.8)) / 2.0);
  EXPECT_THROW(supervised_loss(y, q, 3), std::invalid_argument);
}

TEST(Losses, FloorClampsAndFlags) {
  const std::vector<ClassIndex> y{1};
  const std::vector<ProbabilityVector> q{ProbabilityVector({1.0, 0.0})};
  bool clamped = false;
  const double l = supervised_loss(y, q, 1, &clamped);
  EXPECT_TRUE(clamped);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_DOUBLE_EQ(l, -std::log(kProbFloor));
}

TEST(Losses, TotalIsWeightedSum) {
  EXPECT_DOUBLE_EQ(total_loss(0.5, 0.25), 0.75);
  EXPECT_DOUBLE_EQ(total_loss(0.5, 0.25, 2.0, 4.0), 2.0);
  EXPECT_THROW(total_loss(0.5, 0.25, -1.0, 1.0), std::invalid_argument);
}

TEST(Losses, ModelTermsAgreeWithLossFunctions) {
  Rng rng(9);
  const auto model = ModelParams::initialized(3, 8, 17);
  const auto batch = dyconfid::testing::random_batch(rng, 3, 4, 2);
  std::vector<ProbabilityVector> lp, sp;
  for (const auto& c : batch.labeled) lp.push_back(predict(model, c));
  for (const auto& c : batch.strong) sp.push_back(predict(model, c));
  const double ls = supervised_loss(batch.labels, lp, 4);
  const double lu = unsupervised_loss(sp, batch.mask, 8);
  ModelParams m = model;
  const auto terms = batch.total_terms();
  const double composed = loss_and_gradient(m, terms, false);
  EXPECT_NEAR(composed, total_loss(ls, lu, batch.w_s, batch.w_u), 1e-12);
}

TEST(FlexMatch, ThresholdsFromCounts) {
  const std::vector<long> sigma{100, 50, 0};
  const auto t = flexmatch_thresholds_from_counts(sigma, 0.9);
  EXPECT_DOUBLE_EQ(t[0], 0.9);
  EXPECT_DOUBLE_EQ(t[1], 0.9 / 3.0);
  EXPECT_EQ(t[2], 0.0);
  const std::vector<long> none{0, 0};
  EXPECT_EQ(flexmatch_thresholds_from_counts(none, 0.9), (std::vector<double>{0.0, 0.0}));
}

TEST(FlexMatch, CountsOnlyConfidentPredictions) {
  const std::vector<UnlabeledPrediction> preds{pred(0, {0.95, 0.05}), pred(1, {0.96, 0.04}), pred(2, {0.1, 0.9}),
                                               pred(3, {0.2, 0.8})};
  const auto t = flexmatch_thresholds(preds, 0.9, 2);
  EXPECT_DOUBLE_EQ(t[0], 0.9);
  EXPECT_DOUBLE_EQ(t[1], 0.9 * (0.5 / 1.5));
  EXPECT_THROW(flexmatch_thresholds(preds, 1.0, 2), std::invalid_argument);
}

TEST(Consistency, SquaredDistance) {
  const std::vector<ProbabilityVector> a{ProbabilityVector({0.5, 0.5})}, b{ProbabilityVector({0.25, 0.75})};
  EXPECT_DOUBLE_EQ(consistency_penalty(a, b), 0.125);
  EXPECT_EQ(consistency_penalty(a, a), 0.0);
}
