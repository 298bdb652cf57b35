#include <cmath>
#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "adamatch/cfi.hpp"
#include "adamatch/io.hpp"
#include "adamatch/rng.hpp"

using namespace adamatch;

namespace {

FeatureGrid random_grid(uint64_t seed, int h, int w, int c) {
  Rng rng(seed);
  Tensor t({h, w, c});
  for (float& v : t.data()) v = static_cast<float>(rng.normal());
  return FeatureGrid(t, 8);
}

ModelDims small_dims(AttentionKind kind = AttentionKind::kLinear) {
  ModelDims d;
  d.d_model = 32;
  d.fine_dim = 16;
  d.heads = 4;
  d.attention = kind;
  return d;
}

}  // namespace

TEST(Attention, EqualValueRowsPassThrough) {
  Rng rng(1);
  Tensor q({3, 4}), k({5, 4}), v({5, 2});
  for (float& x : q.data()) x = static_cast<float>(rng.normal());
  for (float& x : k.data()) x = static_cast<float>(rng.normal());
  for (int i = 0; i < 5; ++i) {
    v.at(i, 0) = 1.5f;
    v.at(i, 1) = -2.0f;
  }
  for (auto kind : {AttentionKind::kSoftmax, AttentionKind::kLinear}) {
    const Tensor out = attention(q, k, v, kind);
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(out.at(i, 0), 1.5, 1e-5);
      EXPECT_NEAR(out.at(i, 1), -2.0, 1e-5);
    }
  }
}

TEST(Attention, SingleKeyReturnsValue) {
  const Tensor q({2, 2}, {1, 0, -3, 7}), k({1, 2}, {0.3f, 0.1f}), v({1, 3}, {4, 5, 6});
  for (auto kind : {AttentionKind::kSoftmax, AttentionKind::kLinear}) {
    const Tensor out = attention(q, k, v, kind);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(out.at(i, j), v.at(0, j), 1e-5);
  }
}

TEST(Attention, TwoKeySoftmaxClosedForm) {
  // Width 1 keeps the 1/sqrt(d) logit scale at 1.
  const Tensor q({1, 1}, {1.0f}), k({2, 1}, {std::log(3.0f), 0.0f});
  const Tensor v({2, 2}, {1, 0, 0, 1});
  const Tensor out = attention(q, k, v, AttentionKind::kSoftmax);
  EXPECT_NEAR(out.at(0, 0), 0.75, 1e-6);
  EXPECT_NEAR(out.at(0, 1), 0.25, 1e-6);
}

TEST(Attention, DimensionMismatchThrows) {
  EXPECT_THROW(attention(Tensor({2, 3}), Tensor({2, 4}), Tensor({2, 1}), AttentionKind::kSoftmax),
               std::invalid_argument);
  EXPECT_THROW(attention(Tensor({2, 3}), Tensor({2, 3}), Tensor({3, 1}), AttentionKind::kLinear),
               std::invalid_argument);
}

TEST(Attention, LinearMatchesExplicitKernelSum) {
  Rng rng(3);
  Tensor q({2, 3}), k({4, 3}), v({4, 2});
  for (float& x : q.data()) x = static_cast<float>(rng.normal());
  for (float& x : k.data()) x = static_cast<float>(rng.normal());
  for (float& x : v.data()) x = static_cast<float>(rng.normal());
  const Tensor fq = elu_plus_one(q), fk = elu_plus_one(k);
  const Tensor out = attention(q, k, v, AttentionKind::kLinear);
  for (int i = 0; i < 2; ++i) {
    double num[2] = {0, 0}, den = 0;
    for (int m = 0; m < 4; ++m) {
      double w = 0;
      for (int c = 0; c < 3; ++c) w += fq.at(i, c) * fk.at(m, c);
      EXPECT_GT(w, 0.0);
      den += w;
      num[0] += w * v.at(m, 0);
      num[1] += w * v.at(m, 1);
    }
    EXPECT_NEAR(out.at(i, 0), num[0] / den, 1e-5);
    EXPECT_NEAR(out.at(i, 1), num[1] / den, 1e-5);
  }
}

TEST(Weights, SameSeedSameWeights) {
  EXPECT_EQ(init_weights(4, small_dims()), init_weights(4, small_dims()));
  EXPECT_FALSE(init_weights(4, small_dims()) == init_weights(5, small_dims()));
}

TEST(Weights, ProjectionsAreOrthogonal) {
  const ModelWeights w = init_weights(9, small_dims());
  const Tensor& wq = w.get("cfi.self1.wq");
  const Tensor g = matmul_transposed(wq, wq);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) EXPECT_NEAR(g.at(i, j), i == j ? 1.0 : 0.0, 1e-5);
}

TEST(Weights, MissingNameThrows) {
  const ModelWeights w = zero_weights(small_dims());
  EXPECT_THROW(w.get("cfi.nope"), std::invalid_argument);
  EXPECT_TRUE(w.has("covis.conv2.bias"));
}

TEST(Weights, RejectsIndivisibleHeads) {
  ModelDims d = small_dims();
  d.heads = 5;
  EXPECT_THROW(init_weights(1, d), std::invalid_argument);
}

TEST(Cfi, ZeroWeightsAreIdentity) {
  const FeatureGrid a = random_grid(1, 4, 4, 32), b = random_grid(2, 4, 4, 32);
  for (auto kind : {AttentionKind::kSoftmax, AttentionKind::kLinear}) {
    const CfiOutput out = cfi_forward(a, b, zero_weights(small_dims(kind)));
    EXPECT_EQ(out.featA3.map, a.map);
    EXPECT_EQ(out.featB3.map, b.map);
    EXPECT_EQ(out.featA2.map, a.map);
  }
}

TEST(Cfi, SwapExchangesOutputs) {
  const FeatureGrid a = random_grid(3, 4, 4, 32), b = random_grid(4, 4, 4, 32);
  for (auto kind : {AttentionKind::kSoftmax, AttentionKind::kLinear}) {
    const ModelWeights w = init_weights(7, small_dims(kind));
    const CfiOutput ab = cfi_forward(a, b, w), ba = cfi_forward(b, a, w);
    EXPECT_EQ(ab.featA3.map, ba.featB3.map);
    EXPECT_EQ(ab.featB3.map, ba.featA3.map);
    EXPECT_EQ(ab.queryA, ba.queryB);
    EXPECT_EQ(ab.queryB, ba.queryA);
  }
}

TEST(Cfi, Deterministic) {
  const FeatureGrid a = random_grid(5, 4, 4, 32), b = random_grid(6, 4, 4, 32);
  const ModelWeights w = init_weights(8, small_dims());
  const CfiOutput x = cfi_forward(a, b, w), y = cfi_forward(a, b, w);
  EXPECT_EQ(x.featA3.map, y.featA3.map);
  EXPECT_EQ(x.queryB, y.queryB);
}

TEST(Cfi, RandomWeightsChangeFeatures) {
  const FeatureGrid a = random_grid(5, 4, 4, 32), b = random_grid(6, 4, 4, 32);
  const CfiOutput out = cfi_forward(a, b, init_weights(8, small_dims()));
  EXPECT_GT(max_abs_diff(out.featA3.map, a.map), 1e-3);
  EXPECT_TRUE(all_finite(out.featA3.map));
}

TEST(Cfi, ShapeMismatchThrows) {
  const ModelWeights w = zero_weights(small_dims());
  EXPECT_THROW(cfi_forward(random_grid(1, 4, 4, 32), random_grid(2, 4, 3, 32), w),
               std::invalid_argument);
  EXPECT_THROW(cfi_forward(random_grid(1, 4, 4, 16), random_grid(2, 4, 4, 16), w),
               std::invalid_argument);
}

TEST(Cfi, GoldenOutput) {
  const FeatureGrid a = random_grid(11, 3, 3, 32), b = random_grid(12, 3, 3, 32);
  const CfiOutput out = cfi_forward(a, b, init_weights(13, small_dims()));
  TensorMap got = {{"featA3", out.featA3.map}, {"featB3", out.featB3.map},
                   {"queryA", out.queryA},     {"queryB", out.queryB}};
  const std::string path = std::string(GOLDEN_DIR) + "/cfi_forward.bin";
  if (std::getenv("ADAMATCH_REGEN_GOLDEN")) write_tensors(path, got);
  const TensorMap want = read_tensors(path);
  ASSERT_EQ(want.size(), got.size());
  for (const auto& [name, t] : want) {
    ASSERT_EQ(t.shape(), got.at(name).shape()) << name;
    EXPECT_LT(max_abs_diff(t, got.at(name)), 1e-5) << name;
  }
}
