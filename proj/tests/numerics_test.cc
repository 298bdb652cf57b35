#include <cmath>

#include <gtest/gtest.h>

#include "adamatch/rng.hpp"
#include "adamatch/tensor.hpp"

using namespace adamatch;

TEST(Softmax, RowsSumToOne) {
  const Tensor t({2, 3}, {1, 2, 3, -1, 0, 5});
  const Tensor s = softmax(t, 1);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(s.at(i, 0) + s.at(i, 1) + s.at(i, 2), 1.0, 1e-6);
  }
  EXPECT_GT(s.at(0, 2), s.at(0, 1));
}

TEST(Softmax, LargeLogitsStayFinite) {
  const Tensor t({1, 2}, {1000.0f, 999.0f});
  const Tensor s = softmax(t, 1);
  EXPECT_TRUE(all_finite(s));
  EXPECT_NEAR(s[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-6);
}

TEST(Softmax, ColumnAxis) {
  const Tensor t({2, 2}, {0, 0, std::log(3.0f), 0});
  const Tensor s = softmax(t, 0);
  EXPECT_NEAR(s.at(0, 0), 0.25, 1e-6);
  EXPECT_NEAR(s.at(1, 0), 0.75, 1e-6);
  EXPECT_NEAR(s.at(0, 1), 0.5, 1e-6);
}

TEST(Matmul, HandCase) {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor b({2, 1}, {5, 6});
  const Tensor c = matmul(a, b);
  EXPECT_EQ(c[0], 17.0f);
  EXPECT_EQ(c[1], 39.0f);
  EXPECT_EQ(matmul_transposed(a, a).at(0, 1), 11.0f);
  EXPECT_THROW(matmul(a, Tensor({3, 1})), std::invalid_argument);
}

TEST(Conv2d, IdentityKernel) {
  Tensor in({3, 3, 1});
  for (int k = 0; k < 9; ++k) in[k] = static_cast<float>(k);
  Tensor kernel({3, 3, 1, 1});
  kernel[4] = 1.0f;
  EXPECT_EQ(conv2d(in, kernel), in);
}

TEST(Conv2d, ZeroPaddingAtBorder) {
  const Tensor in({2, 2, 1}, 1.0f);
  const Tensor kernel({3, 3, 1, 1}, 1.0f);
  const Tensor out = conv2d(in, kernel, Tensor({1}, {0.5f}));
  for (int k = 0; k < 4; ++k) EXPECT_FLOAT_EQ(out[k], 4.5f);
}

TEST(Conv2d, RejectsChannelMismatch) {
  EXPECT_THROW(conv2d(Tensor({2, 2, 2}), Tensor({3, 3, 1, 1})), std::invalid_argument);
  EXPECT_THROW(conv2d(Tensor({2, 2, 1}), Tensor({2, 2, 1, 1})), std::invalid_argument);
}

TEST(Bilinear, InterpolatesAndFlags) {
  Tensor map({2, 2, 1}, {0, 1, 2, 3});
  const std::vector<Eigen::Vector2d> pts = {{0.5, 0.5}, {1.0, 0.0}, {1.5, 0.0}};
  const SampleResult r = bilinear_sample(map, pts);
  EXPECT_FLOAT_EQ(r.values[0], 1.5f);
  EXPECT_FLOAT_EQ(r.values[1], 1.0f);
  EXPECT_FALSE(r.in_range[2]);
  EXPECT_FALSE(r.all_in_range());
}

TEST(LayerNorm, ZeroMeanUnitVariance) {
  const Tensor x({1, 4}, {1, 2, 3, 4});
  const Tensor y = layer_norm(x, Tensor({4}, 1.0f), Tensor({4}));
  EXPECT_NEAR(sum(y), 0.0, 1e-5);
  double var = 0;
  for (int k = 0; k < 4; ++k) var += y[k] * y[k];
  EXPECT_NEAR(var / 4, 1.0, 1e-3);
}

TEST(Rng, ReproducibleStreams) {
  Rng a(42), b(42);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  Rng c(7);
  double m = 0;
  for (int k = 0; k < 20000; ++k) m += c.normal();
  EXPECT_NEAR(m / 20000, 0.0, 0.03);
}
