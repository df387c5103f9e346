#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "soilpick/rng.hpp"
#include "soilpick/vision.hpp"

using namespace soilpick;

namespace {

constexpr Rgb kSoil{0.45f, 0.30f, 0.18f};
constexpr Rgb kRock{0.62f, 0.62f, 0.60f};

/// Random disc blobs of soil on rock, with small colour jitter.
LabeledImage blob_image(int n, Rng& rng) {
  LabeledImage img{RgbImage(n, n), Mask(n, n)};
  const int blobs = 1 + static_cast<int>(rng.below(3));
  std::vector<std::array<double, 3>> discs;
  for (int b = 0; b < blobs; ++b)
    discs.push_back({rng.uniform(0, n), rng.uniform(0, n), rng.uniform(n / 8.0, n / 3.0)});
  for (int v = 0; v < n; ++v)
    for (int u = 0; u < n; ++u) {
      bool soil = false;
      for (const auto& d : discs) soil |= (u - d[0]) * (u - d[0]) + (v - d[1]) * (v - d[1]) <= d[2] * d[2];
      Rgb c = soil ? kSoil : kRock;
      for (int k = 0; k < 3; ++k) c[k] += static_cast<float>(rng.uniform(-0.02, 0.02));
      img.rgb(u, v) = c;
      img.mask(u, v) = soil ? 1 : 0;
    }
  return img;
}

Mask random_mask(int w, int h, Rng& rng) {
  Mask m(w, h);
  for (auto& p : m.pixels()) p = rng.bernoulli(0.4) ? 1 : 0;
  return m;
}

/// Image whose pixel values encode its index, for tracking through a split.
LabeledImage tagged(std::size_t i) {
  LabeledImage img{RgbImage(2, 2), Mask(2, 2)};
  for (auto& p : img.rgb.pixels()) p = Rgb{static_cast<float>(i), 0.0f, 0.0f};
  return img;
}

std::multiset<float> tags(const std::vector<LabeledImage>& v) {
  std::multiset<float> s;
  for (const auto& img : v) s.insert(img.rgb(0, 0).r);
  return s;
}

}  // namespace

TEST(Resize, SameSizeIsIdentity) {
  Rng rng(1);
  const auto img = blob_image(16, rng);
  EXPECT_TRUE(resize(img, 16, 16) == img);
}

TEST(Resize, ConstantStaysConstantAndMaskStaysBinary) {
  RgbImage rgb(640, 480, Rgb{0.2f, 0.4f, 0.6f});
  Rng rng(2);
  Mask mask = random_mask(640, 480, rng);
  const auto out = resize(LabeledImage{rgb, mask}, 512, 512);
  ASSERT_EQ(out.rgb.width(), 512);
  ASSERT_EQ(out.rgb.height(), 512);
  for (const auto& p : out.rgb.pixels()) {
    EXPECT_NEAR(p.r, 0.2f, 1e-6f);
    EXPECT_NEAR(p.g, 0.4f, 1e-6f);
    EXPECT_NEAR(p.b, 0.6f, 1e-6f);
  }
  for (auto p : out.mask.pixels()) EXPECT_LE(p, 1);
}

TEST(Resize, RejectsZeroSize) {
  EXPECT_THROW(resize_bilinear(RgbImage(), 4, 4), std::invalid_argument);
  EXPECT_THROW(resize_bilinear(RgbImage(4, 4), 0, 4), std::invalid_argument);
}

TEST(Split, OneFiftyImages) {
  std::vector<LabeledImage> imgs;
  for (std::size_t i = 0; i < 150; ++i) imgs.push_back(tagged(i));
  const auto s = split_dataset(imgs, {0.7, 0.2, 0.1}, 3);
  EXPECT_EQ(s.train.size(), 105u);
  EXPECT_EQ(s.validation.size(), 30u);
  EXPECT_EQ(s.test.size(), 15u);
}

TEST(Split, AllToTraining) {
  std::vector<LabeledImage> imgs;
  for (std::size_t i = 0; i < 10; ++i) imgs.push_back(tagged(i));
  const auto s = split_dataset(imgs, {1.0, 0.0, 0.0}, 0);
  EXPECT_EQ(s.train.size(), 10u);
  EXPECT_TRUE(s.validation.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(Split, RejectsRatiosNotSummingToOne) {
  EXPECT_THROW(split_dataset({tagged(0)}, {0.5, 0.2, 0.2}, 0), std::invalid_argument);
}

TEST(Split, DeterministicPartitionProperty) {
  Rng rng(4);
  for (int n = 0; n < 50; ++n) {
    const std::size_t count = rng.below(60);
    std::vector<LabeledImage> imgs;
    for (std::size_t i = 0; i < count; ++i) imgs.push_back(tagged(i));
    const double a = rng.uniform(0, 1), b = rng.uniform(0, 1 - a);
    const std::array<double, 3> r{a, b, 1.0 - a - b};
    const auto s1 = split_dataset(imgs, r, n), s2 = split_dataset(imgs, r, n);
    EXPECT_EQ(tags(s1.train), tags(s2.train));
    EXPECT_EQ(tags(s1.validation), tags(s2.validation));
    EXPECT_EQ(s1.train.size() + s1.validation.size() + s1.test.size(), count);
    std::multiset<float> all = tags(s1.train);
    for (float t : tags(s1.validation)) all.insert(t);
    for (float t : tags(s1.test)) all.insert(t);
    EXPECT_EQ(all, tags(imgs));
  }
}

TEST(Dihedral, QuarterTurnIsClockwise) {
  Rng rng(5);
  const auto img = blob_image(9, rng);
  const auto r = apply_dihedral(img.rgb, 1);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) EXPECT_EQ(r(8 - y, x), img.rgb(x, y));
}

TEST(Dihedral, GroupRelations) {
  Rng rng(6);
  const auto img = blob_image(12, rng);
  auto four = img;
  for (int k = 0; k < 4; ++k) four = apply_dihedral(four, 1);
  EXPECT_TRUE(four == img);
  EXPECT_TRUE(apply_dihedral(apply_dihedral(img, 4), 4) == img);
  EXPECT_TRUE(apply_dihedral(img, 0) == img);
  std::set<std::vector<float>> distinct;
  for (int e = 0; e < 8; ++e) {
    const auto t = apply_dihedral(img.rgb, e);
    std::vector<float> flat;
    for (const auto& p : t.pixels()) flat.push_back(p.r);
    distinct.insert(flat);
  }
  EXPECT_EQ(distinct.size(), 8u);
}

TEST(Augment, PreservesLabelCountsProperty) {
  Rng rng(7);
  for (int n = 0; n < 100; ++n) {
    const auto img = blob_image(10, rng);
    const auto a = augment(img, rng);
    EXPECT_EQ(count_ones(a.mask), count_ones(img.mask));
    EXPECT_EQ(a.rgb.width(), img.rgb.width());
  }
}

TEST(Augment, RejectsNonSquare) {
  Rng rng(8);
  EXPECT_THROW(augment(LabeledImage{RgbImage(4, 3), Mask(4, 3)}, rng), std::invalid_argument);
}

TEST(Train, SeparableColoursReachNearPerfectAccuracy) {
  Rng rng(9);
  DatasetSplit d;
  for (int i = 0; i < 8; ++i) d.train.push_back(blob_image(32, rng));
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 0.2;
  const auto r = train(d, cfg);
  Confusion c;
  for (int i = 0; i < 4; ++i) {
    const auto test = blob_image(32, rng);
    c += confusion(segment(r.model, test.rgb), test.mask);
  }
  EXPECT_GE(metrics_from(c).accuracy, 0.99);
  EXPECT_LT(r.final_loss, r.initial_loss);
}

TEST(Train, ZeroLearningRateKeepsZeroWeights) {
  Rng rng(10);
  DatasetSplit d;
  for (int i = 0; i < 3; ++i) d.train.push_back(blob_image(16, rng));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  const auto r = train(d, cfg);
  for (double w : r.model.weights) EXPECT_EQ(w, 0.0);
  EXPECT_EQ(r.final_loss, r.initial_loss);
}

TEST(Train, Deterministic) {
  Rng rng(11);
  DatasetSplit d;
  for (int i = 0; i < 4; ++i) d.train.push_back(blob_image(16, rng));
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 42;
  EXPECT_TRUE(train(d, cfg).model == train(d, cfg).model);
}

TEST(Train, StepCountAndAugmentation) {
  Rng rng(12);
  DatasetSplit d;
  for (int i = 0; i < 5; ++i) d.train.push_back(blob_image(8, rng));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  const auto r = train(d, cfg);
  EXPECT_EQ(r.steps, 9u);
  EXPECT_EQ(r.step_losses.size(), 9u);
  EXPECT_EQ(r.augmented_samples, 15u);
  cfg.augment = false;
  EXPECT_EQ(train(d, cfg).augmented_samples, 0u);
}

TEST(Train, RejectsBadInput) {
  EXPECT_THROW(train(DatasetSplit{}, TrainConfig{}), std::invalid_argument);
  DatasetSplit d;
  d.train.push_back(LabeledImage{RgbImage(4, 4), Mask(4, 4)});
  TrainConfig cfg;
  cfg.learning_rate = -1.0;
  EXPECT_THROW(train(d, cfg), std::invalid_argument);
}

TEST(Train, HugeLearningRateDivergesOrStaysFinite) {
  Rng rng(13);
  DatasetSplit d;
  for (int i = 0; i < 3; ++i) d.train.push_back(blob_image(8, rng));
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e300;
  try {
    const auto r = train(d, cfg);
    for (double w : r.model.weights) EXPECT_TRUE(std::isfinite(w));
  } catch (const TrainingDiverged&) {
    SUCCEED();
  }
}

TEST(Segment, ZeroWeightsTieToPickable) {
  const SegmenterModel m;
  Rng rng(14);
  const auto img = blob_image(8, rng);
  EXPECT_EQ(count_ones(segment(m, img.rgb)), 64u);
}

TEST(Metrics, TwoByTwoExample) {
  Mask pred(2, 2), truth(2, 2);
  pred(0, 0) = 1;
  pred(1, 0) = 1;
  truth(0, 0) = 1;
  truth(0, 1) = 1;
  const auto m = evaluate(pred, truth);
  EXPECT_EQ(m.accuracy, 0.5);
  EXPECT_EQ(m.precision, 0.5);
  EXPECT_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.iou, 1.0 / 3.0);
}

TEST(Metrics, ZeroDenominators) {
  const Mask empty(3, 3);
  const auto both = evaluate(empty, empty);
  EXPECT_EQ(both.accuracy, 1.0);
  EXPECT_EQ(both.precision, 1.0);
  EXPECT_EQ(both.recall, 1.0);
  EXPECT_EQ(both.iou, 1.0);
  Mask truth(3, 3);
  truth(1, 1) = 1;
  const auto missed = evaluate(empty, truth);
  EXPECT_EQ(missed.precision, 0.0);
  EXPECT_EQ(missed.recall, 0.0);
  EXPECT_EQ(missed.iou, 0.0);
  EXPECT_THROW(evaluate(Mask(2, 2), Mask(3, 3)), std::invalid_argument);
}

TEST(Metrics, BoundsAndDihedralInvarianceProperty) {
  Rng rng(15);
  for (int n = 0; n < 300; ++n) {
    const int s = 1 + static_cast<int>(rng.below(12));
    const Mask p = random_mask(s, s, rng), t = random_mask(s, s, rng);
    const auto m = evaluate(p, t);
    for (double x : {m.accuracy, m.precision, m.recall, m.iou}) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
    EXPECT_LE(m.iou, std::min(m.precision, m.recall) + 1e-15);
    const int e = static_cast<int>(rng.below(8));
    EXPECT_EQ(evaluate(apply_dihedral(p, e), apply_dihedral(t, e)), m);
  }
}
