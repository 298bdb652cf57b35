#include <cmath>

#include <gtest/gtest.h>

#include "adamatch/covisible.hpp"
#include "adamatch/synthscene.hpp"

using namespace adamatch;

namespace {

ModelDims tiny() {
  ModelDims d;
  d.d_model = 2;
  d.fine_dim = 2;
  d.heads = 1;
  return d;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Head, ZeroFeaturesGiveHalf) {
  const ModelWeights w = init_weights(3);
  const FeatureGrid f(Tensor({8, 8, 256}), 8);
  const Tensor p = covisible_head(f, w.get("cfi.query"), w);
  ASSERT_EQ(p.shape(), (std::vector<int64_t>{8, 8}));
  for (float v : p.data()) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Head, HandComputedTwoByTwo) {
  // d = 2, mid = 1. conv1 only looks at the center tap of channel 0,
  // conv2 only at the center tap, so each cell is independent.
  ModelWeights w = zero_weights(tiny());
  Tensor k1({3, 3, 2, 1});
  k1[((1 * 3 + 1) * 2 + 0) * 1 + 0] = 1.0f;
  w.params["covis.conv1.weight"] = k1;
  w.params["covis.conv1.bias"] = Tensor({1}, {-0.5f});
  Tensor k2({3, 3, 1, 1});
  k2[(1 * 3 + 1)] = 2.0f;
  w.params["covis.conv2.weight"] = k2;
  w.params["covis.conv2.bias"] = Tensor({1}, {0.25f});

  const Tensor feat({2, 2, 2}, {1, 0, 0, 1, 2, 2, -1, 0});
  const Tensor query({1, 2}, {1.0f, -1.0f});
  const Tensor p = covisible_head(FeatureGrid(feat, 8), query, w);
  for (int cell = 0; cell < 4; ++cell) {
    const double f0 = feat[2 * cell], f1 = feat[2 * cell + 1];
    const double weight = sig(f0 - f1);
    const double enhanced = weight * f0 + f0;
    const double hidden = std::max(0.0, enhanced - 0.5);
    EXPECT_NEAR(p[cell], sig(2.0 * hidden + 0.25), 1e-6) << cell;
  }
}

TEST(Head, OutputInOpenUnitInterval) {
  const ModelWeights w = init_weights(5);
  const ScenePair pair = make_planar_pair(2, 1.5, 3.0, 0.05);
  const Tensor p = covisible_head(pair.descA_c, w.get("cfi.query"), w);
  for (float v : p.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Head, ChannelMismatchThrows) {
  const ModelWeights w = init_weights(5);
  EXPECT_THROW(covisible_head(FeatureGrid(Tensor({2, 2, 8}), 8), w.get("cfi.query"), w),
               std::invalid_argument);
}

TEST(Threshold, Elementwise) {
  const Tensor p({1, 3}, {0.1f, 0.2f, 0.3f});
  EXPECT_EQ(threshold_mask(p, 0.2), (std::vector<uint8_t>{0, 1, 1}));
}

TEST(Threshold, RejectsOutOfRange) {
  const Tensor p({1, 1}, {0.5f});
  EXPECT_THROW(threshold_mask(p, 1.0 + 1e-9), std::invalid_argument);
  EXPECT_THROW(threshold_mask(p, -0.1), std::invalid_argument);
}

TEST(Map, FromLabelsMatchesCoverage) {
  const ScenePair pair = make_planar_pair(4, 2.0, 0.0, 0.0);
  const CoVisibleMap m = covisible_from_labels(pair.gt);
  EXPECT_EQ(m.maskA, pair.gt.cov_a);
  EXPECT_EQ(m.maskB, pair.gt.cov_b);
}

TEST(Map, PgmHeaderAndPixels) {
  const std::string pgm = mask_to_pgm({1, 0, 0, 1}, 2, 2);
  const std::string header = "P5\n2 2\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 4);
  EXPECT_EQ(pgm.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size()]), 255);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 1]), 0);
}
