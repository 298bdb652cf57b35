#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "adamatch/refine.hpp"
#include "adamatch/synthscene.hpp"

using namespace adamatch;

namespace {

Tensor ramp_patch(int w) {
  Tensor t({1, w, w, 1});
  for (int v = 0; v < w; ++v)
    for (int u = 0; u < w; ++u) t[v * w + u] = static_cast<float>(u);
  return t;
}

Tensor one_hot_patch(int w, int c, int hot_u, int hot_v) {
  Tensor t({w, w, c});
  for (int k = 0; k < w * w; ++k) t[k * c + (k == hot_v * w + hot_u ? 0 : 1)] = 1.0f;
  return t;
}

MatchSet proposals_from(const std::vector<std::pair<int, int>>& pairs, int dir) {
  MatchSet m;
  m.direction = dir;
  for (auto [i, j] : pairs) m.pairs.push_back({i, j, 0.9f});
  return m;
}

}  // namespace

TEST(ScaleAlign, UnitScaleUnchanged) {
  const Tensor p = ramp_patch(5);
  EXPECT_EQ(scale_align(p, 1.0), p);
}

TEST(ScaleAlign, RampSlopeHalvesAtTwo) {
  const Tensor out = scale_align(ramp_patch(5), 2.0);
  for (int v = 0; v < 5; ++v)
    for (int u = 0; u < 5; ++u) EXPECT_NEAR(out[v * 5 + u], 2.0 + 0.5 * (u - 2), 1e-6);
}

TEST(ScaleAlign, ConstantPatchUnchanged) {
  const Tensor p({2, 5, 5, 3}, 0.7f);
  for (double s : {1.3, 2.0, 4.5}) EXPECT_LT(max_abs_diff(scale_align(p, s), p), 1e-6);
}

TEST(ScaleAlign, RejectsShrink) {
  EXPECT_THROW(scale_align(ramp_patch(5), 0.5), std::invalid_argument);
}

TEST(Regress, UniformPatchIsCentered) {
  const Tensor patch({5, 5, 2}, 1.0f);
  const std::vector<float> center = {1.0f, 1.0f};
  const Regression r = expectation_regress(center, patch, 1.0);
  EXPECT_NEAR(r.offset.x(), 0.0, 1e-9);
  EXPECT_NEAR(r.offset.y(), 0.0, 1e-9);
  // Each axis of the uniform 5-point grid has variance 2.
  EXPECT_NEAR(r.variance, 4.0, 1e-5);
}

TEST(Regress, SinglePeakCollapses) {
  const Tensor patch = one_hot_patch(5, 2, 4, 0);
  const std::vector<float> center = {1.0f, 0.0f};
  const Regression r = expectation_regress(center, patch, 0.01);
  EXPECT_NEAR(r.offset.x(), 2.0, 1e-6);
  EXPECT_NEAR(r.offset.y(), -2.0, 1e-6);
  EXPECT_NEAR(r.variance, 0.0, 1e-6);
}

TEST(Regress, TwoPeaksAverage) {
  Tensor patch({5, 5, 1}, 0.0f);
  patch[2 * 5 + 1] = 1.0f;
  patch[2 * 5 + 3] = 1.0f;
  const std::vector<float> center = {100.0f};
  const Regression r = expectation_regress(center, patch, 1.0);
  EXPECT_NEAR(r.offset.x(), 0.0, 1e-6);
  EXPECT_NEAR(r.offset.y(), 0.0, 1e-6);
  EXPECT_NEAR(r.variance, 1.0, 1e-5);
}

TEST(Regress, HeatmapSumsToOne) {
  const Tensor patch = one_hot_patch(5, 2, 1, 3);
  const std::vector<float> center = {0.3f, -0.2f};
  const Regression r = expectation_regress(center, patch, 0.5);
  EXPECT_NEAR(sum(r.heatmap), 1.0, 1e-6);
  EXPECT_THROW(expectation_regress(center, patch, 0.0), std::invalid_argument);
}

TEST(Refine, EmptyProposals) {
  const ScenePair p = make_planar_pair(1, 1.0, 0.0, 0.0);
  const RefineResult r = refine_matches(MatchSet{}, p.descA_f, p.descB_f, ScaleEstimate{},
                                        init_weights(1), RefineConfig{});
  EXPECT_TRUE(r.matches.empty());
  EXPECT_EQ(r.stats.proposals, 0);
}

TEST(Refine, CornerProposalDiscarded) {
  const ScenePair p = make_planar_pair(1, 1.0, 0.0, 0.0);
  const MatchSet m = proposals_from({{0, 0}, {27, 27}, {63, 63}}, 0);
  const RefineResult r =
      refine_matches(m, p.descA_f, p.descB_f, ScaleEstimate{}, init_weights(1), RefineConfig{});
  EXPECT_EQ(r.matches.size(), 1u);
  EXPECT_EQ(r.stats.discarded, 2);
  EXPECT_EQ(r.matches[0].i, 27);
}

TEST(Refine, IdentityPairStaysPut) {
  const ScenePair p = make_planar_pair(2, 1.0, 0.0, 0.0);
  const ModelWeights w = init_weights(3);
  MatchSet m;
  for (const auto& [i, j] : p.gt.from_a) m.pairs.push_back({i, j, 1.0f});
  const RefineResult r = refine_matches(m, p.descA_f, p.descB_f, ScaleEstimate{}, w, RefineConfig{});
  ASSERT_FALSE(r.matches.empty());
  int good = 0;
  for (const RefinedMatch& rm : r.matches) good += (rm.pB - rm.pA).norm() < 0.25 ? 1 : 0;
  EXPECT_GE(good, 0.95 * r.matches.size()) << good << "/" << r.matches.size();
}

TEST(Refine, ResultsInsideWindowAndNonnegativeVariance) {
  const ScenePair p = make_planar_pair(5, 2.4, 6.0, 0.05);
  MatchSet m;
  m.direction = 1;
  for (const auto& [i, j] : p.gt.from_b) m.pairs.push_back({i, j, 1.0f});
  ScaleEstimate s;
  s.s1 = 4.0;
  s.s = 4.0;
  s.index = 1;
  const RefineResult r = refine_matches(m, p.descA_f, p.descB_f, s, init_weights(3), RefineConfig{});
  ASSERT_FALSE(r.matches.empty());
  for (const RefinedMatch& rm : r.matches) {
    const Vec2 center(8 * (rm.i % 8) + 4, 8 * (rm.i / 8) + 4);
    EXPECT_LE(std::abs(rm.pA.x() - center.x()), 4.0 + 1e-9);
    EXPECT_LE(std::abs(rm.pA.y() - center.y()), 4.0 + 1e-9);
    EXPECT_GE(rm.variance, 0.0);
    const Vec2 fixed(8 * (rm.j % 8) + 4, 8 * (rm.j / 8) + 4);
    EXPECT_EQ(rm.pB, fixed);
  }
}

TEST(Refine, BeatsPatchCenters) {
  const ScenePair p = make_planar_pair(8, 1.6, 4.0, 0.0);
  MatchSet m;
  for (const auto& [i, j] : p.gt.from_a) m.pairs.push_back({i, j, 1.0f});
  ScaleEstimate s;
  s.s0 = 2.5;
  s.s = 2.5;
  const RefineResult r = refine_matches(m, p.descA_f, p.descB_f, s, init_weights(3), RefineConfig{});
  std::vector<double> refined, coarse;
  for (const RefinedMatch& rm : r.matches) {
    const Vec2 truth = *p.geometry.a_to_b(rm.pA);
    refined.push_back((rm.pB - truth).norm());
    coarse.push_back((Vec2(8 * (rm.j % 8) + 4, 8 * (rm.j / 8) + 4) - truth).norm());
  }
  ASSERT_GT(refined.size(), 10u);
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  EXPECT_LT(median(refined), median(coarse));
  EXPECT_LT(median(refined), 0.5);
}

TEST(Refine, PreservesProposalOrder) {
  const ScenePair p = make_planar_pair(2, 1.0, 0.0, 0.0);
  const MatchSet m = proposals_from({{36, 36}, {18, 18}, {27, 27}, {19, 18}}, 0);
  const RefineResult r =
      refine_matches(m, p.descA_f, p.descB_f, ScaleEstimate{}, init_weights(1), RefineConfig{});
  ASSERT_EQ(r.matches.size(), 4u);
  EXPECT_EQ(r.matches[0].i, 36);
  EXPECT_EQ(r.matches[1].i, 18);
  EXPECT_EQ(r.matches[3].i, 19);
}

TEST(Refine, RejectsEvenWindow) {
  const ScenePair p = make_planar_pair(2, 1.0, 0.0, 0.0);
  RefineConfig cfg;
  cfg.window = 4;
  EXPECT_THROW(refine_matches(MatchSet{}, p.descA_f, p.descB_f, ScaleEstimate{}, init_weights(1), cfg),
               std::invalid_argument);
}
