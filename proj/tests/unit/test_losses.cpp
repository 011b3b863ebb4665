#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ovenet/losses.hpp"

using namespace ovenet;
using ovenet::testing::gradcheck;
using ovenet::testing::random_tensor;

namespace {

std::vector<double> vec(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

LabelMap random_labels(std::int64_t b, std::int64_t h, std::int64_t w, int k, double ignore_rate,
                       std::mt19937_64& rng) {
  LabelMap m(b, h, w, 0);
  std::uniform_int_distribution<int> cls(0, k - 1);
  std::bernoulli_distribution ign(ignore_rate);
  for (auto& v : m.ids) v = ign(rng) ? kIgnoreId : cls(rng);
  return m;
}

std::vector<int> ints(const LabelMap& m) { return {m.ids.begin(), m.ids.end()}; }

}  // namespace

TEST(CrossEntropy, MatchesOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + trial % 5;
    auto logits = random_tensor({2, k, 4, 5}, rng, -4, 4);
    auto labels = random_labels(2, 4, 5, k, 0.2, rng);
    labels.ids[0] = 0;
    const double ref = oracle::cross_entropy(vec(logits), {2, k, 4, 5}, ints(labels), kIgnoreId);
    EXPECT_NEAR(cross_entropy(logits, labels).item(), ref, 1e-12);
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  Tensor<double> logits(Shape{1, 4, 2, 2}, 0.0);
  EXPECT_NEAR(cross_entropy(logits, LabelMap(2, 2, 3)).item(), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, ErrorsOnAllIgnoredAndBadIds) {
  Tensor<double> logits(Shape{1, 3, 2, 2}, 0.0);
  EXPECT_THROW(cross_entropy(logits, LabelMap(2, 2, kIgnoreId)), Error);
  EXPECT_THROW(cross_entropy(logits, LabelMap(2, 2, 3)), ShapeError);
  EXPECT_THROW(cross_entropy(logits, LabelMap(2, 3, 0)), ShapeError);
}

TEST(CrossEntropy, Gradient) {
  std::mt19937_64 rng(2);
  const auto labels = random_labels(2, 3, 3, 4, 0.2, rng);
  auto f = [&](const std::vector<Tensor<double>>& in) { return cross_entropy(in[0], labels); };
  EXPECT_LE(gradcheck(f, {random_tensor({2, 4, 3, 3}, rng, -3, 3)}).rel_error, 1e-6);
}

TEST(Ohem, KeptSetMatchesOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + trial % 5;
    LossConfig cfg;
    cfg.ohem_threshold = 0.2 + 0.1 * (trial % 7);
    cfg.ohem_min_kept_fraction = trial % 2 ? 0.5 : 0.0625;
    auto logits = random_tensor({1, k, 8, 8}, rng, -3, 3);
    auto labels = random_labels(1, 8, 8, k, 0.1, rng);
    const auto kept = ohem_select(logits, labels, cfg);
    const auto ref = oracle::ohem_kept(vec(logits), {1, k, 8, 8}, ints(labels), kIgnoreId, cfg.ohem_threshold,
                                       cfg.ohem_min_kept_fraction);
    ASSERT_EQ(kept, ref) << "trial " << trial;
    EXPECT_NEAR(ohem_cross_entropy(logits, labels, cfg).item(),
                oracle::masked_cross_entropy(vec(logits), {1, k, 8, 8}, ints(labels), ref), 1e-12);
  }
}

TEST(Ohem, FallsBackToHardestWhenTooFewQualify) {
  // Confident everywhere: nothing is below the threshold, so the hardest
  // ceil(0.5 * 4) = 2 pixels are kept.
  Tensor<double> logits(Shape{1, 2, 1, 4}, std::vector<double>{5, 4, 6, 3, 0, 0, 0, 0});
  LossConfig cfg;
  cfg.ohem_threshold = 0.5;
  cfg.ohem_min_kept_fraction = 0.5;
  const auto kept = ohem_select(logits, LabelMap(1, 4, 0), cfg);
  EXPECT_EQ(kept, (std::vector<std::uint8_t>{0, 1, 0, 1}));
}

TEST(Ohem, Gradient) {
  std::mt19937_64 rng(4);
  const auto labels = random_labels(1, 4, 4, 3, 0.1, rng);
  LossConfig cfg;
  cfg.ohem_threshold = 0.6;
  auto f = [&](const std::vector<Tensor<double>>& in) { return ohem_cross_entropy(in[0], labels, cfg); };
  EXPECT_LE(gradcheck(f, {random_tensor({1, 3, 4, 4}, rng, -2, 2)}).rel_error, 1e-6);
}

TEST(SemanticLoss, WeightsTheThreeTerms) {
  std::mt19937_64 rng(5);
  auto a = random_tensor({1, 3, 4, 4}, rng), b = random_tensor({1, 3, 4, 4}, rng), c = random_tensor({1, 3, 4, 4}, rng);
  const auto labels = random_labels(1, 4, 4, 3, 0.0, rng);
  LossConfig cfg;
  cfg.ohem_enabled = false;
  cfg.kappa = 0.3;
  cfg.lambda = 0.7;
  const double expect = cross_entropy(a, labels).item() + 0.3 * cross_entropy(b, labels).item() +
                        0.7 * cross_entropy(c, labels).item();
  EXPECT_NEAR(semantic_loss(a, b, c, labels, cfg).item(), expect, 1e-12);
  cfg.ohem_enabled = true;
  cfg.ohem_all_terms = false;
  const double mined = ohem_cross_entropy(a, labels, cfg).item() + 0.3 * cross_entropy(b, labels).item() +
                       0.7 * cross_entropy(c, labels).item();
  EXPECT_NEAR(semantic_loss(a, b, c, labels, cfg).item(), mined, 1e-12);
}

TEST(ConfidenceLoss, MatchesOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    auto conf = random_tensor({2, 1, 8, 8}, rng, 0.01, 0.99);
    auto offsets = random_tensor({2, 2, 8, 8}, rng, -0.4, 0.4);
    const auto labels = random_labels(2, 8, 8, 3, 0.1, rng);
    const double ref = oracle::confidence_loss(vec(conf), vec(offsets), 2, 8, 8, ints(labels), kIgnoreId);
    EXPECT_NEAR(confidence_loss(conf, offsets, labels).item(), ref, 1e-12);
  }
}

TEST(ConfidenceLoss, GradientWrtConfidenceOnly) {
  std::mt19937_64 rng(7);
  const auto labels = random_labels(1, 6, 6, 3, 0.1, rng);
  auto offsets = random_tensor({1, 2, 6, 6}, rng, -0.3, 0.3);
  auto f = [&](const std::vector<Tensor<double>>& in) { return confidence_loss(in[0], in[1], labels); };
  const auto r = gradcheck(f, {random_tensor({1, 1, 6, 6}, rng, 0.05, 0.95), offsets}, {0});
  EXPECT_LE(r.rel_error, 1e-6);
}

TEST(ConfidenceLoss, ZeroWhenNothingContributes) {
  Tensor<double> conf(Shape{1, 1, 2, 2}, 0.5);
  Tensor<double> off(Shape{1, 2, 2, 2}, 0.0);
  EXPECT_EQ(confidence_loss(conf, off, LabelMap(2, 2, kIgnoreId)).item(), 0.0);
}

TEST(ConfidenceLoss, StrictModeRejectsSaturatedConfidence) {
  Tensor<double> conf(Shape{1, 1, 1, 2}, std::vector<double>{1.0, 0.5});
  Tensor<double> off(Shape{1, 2, 1, 2}, 0.0);
  EXPECT_THROW(confidence_loss(conf, off, LabelMap(1, 2, 0), kIgnoreId, OffsetScale::kPerAxis, NumericMode::kStrict),
               NumericError);
  EXPECT_TRUE(std::isfinite(confidence_loss(conf, off, LabelMap(1, 2, 0)).item()));
}

TEST(TotalLoss, IsSemanticPlusConfidence) {
  std::mt19937_64 rng(8);
  auto a = random_tensor({1, 3, 4, 4}, rng), b = random_tensor({1, 3, 4, 4}, rng), c = random_tensor({1, 3, 4, 4}, rng);
  auto conf = random_tensor({1, 1, 4, 4}, rng, 0.1, 0.9), off = random_tensor({1, 2, 4, 4}, rng, -0.2, 0.2);
  const auto labels = random_labels(1, 4, 4, 3, 0.0, rng);
  LossConfig cfg;
  const auto t = total_loss(a, b, c, conf, off, labels, cfg);
  EXPECT_DOUBLE_EQ(t.total.item(), t.semantic.item() + t.confidence.item());
  EXPECT_DOUBLE_EQ(t.semantic.item(), semantic_loss(a, b, c, labels, cfg).item());
}

TEST(LossConfig, Validation) {
  LossConfig cfg;
  cfg.kappa = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.ohem_threshold = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
