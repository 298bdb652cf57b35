#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "adamatch/assignment.hpp"
#include "adamatch/labels.hpp"
#include "adamatch/losses.hpp"
#include "adamatch/metrics.hpp"
#include "adamatch/rng.hpp"
#include "adamatch/synthscene.hpp"

using namespace adamatch;

namespace {

Tensor random_matrix(Rng& rng, int n, int m, double spread) {
  Tensor t({n, m});
  for (float& v : t.data()) v = static_cast<float>(rng.normal() * spread);
  return t;
}

}  // namespace

TEST(Property, FilterIsSubset) {
  Rng rng(100);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(20));
    CoVisibleMap cov;
    cov.maskA.resize(n);
    cov.maskB.resize(n);
    for (auto& v : cov.maskA) v = rng.uniform() < 0.6;
    for (auto& v : cov.maskB) v = rng.uniform() < 0.6;
    MatchSet m;
    m.direction = static_cast<int>(rng.below(2));
    const int k = static_cast<int>(rng.below(30));
    for (int t = 0; t < k; ++t) {
      m.pairs.push_back({static_cast<int>(rng.below(n)), static_cast<int>(rng.below(n)),
                         static_cast<float>(rng.uniform())});
    }
    const MatchSet f = filter_covisible(m, cov);
    ASSERT_LE(f.size(), m.size());
    ASSERT_EQ(f.direction, m.direction);
    size_t cursor = 0;
    for (const PatchMatch& x : f.pairs) {
      while (cursor < m.size() && !(m.pairs[cursor] == x)) ++cursor;
      ASSERT_LT(cursor, m.size());
      ASSERT_TRUE(cov.maskA[x.i] && cov.maskB[x.j]);
      ++cursor;
    }
    size_t kept = 0;
    for (const PatchMatch& x : m.pairs) kept += cov.maskA[x.i] && cov.maskB[x.j];
    ASSERT_EQ(kept, f.size());
  }
}

TEST(Property, DualSoftmaxStructure) {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10)), m = 2 + static_cast<int>(rng.below(10));
    SimilarityMatrix sim;
    sim.S = random_matrix(rng, n, m, rng.uniform(0.1, 8.0));
    const double theta = rng.uniform(0.0, 0.9);
    const DualSoftmax d = dual_softmax_proposals(sim, theta);
    std::set<int> rows, cols;
    for (const PatchMatch& x : d.M0.pairs) {
      ASSERT_GT(x.confidence, theta);
      ASSERT_TRUE(rows.insert(x.i).second);
    }
    for (const PatchMatch& x : d.M1.pairs) {
      ASSERT_GT(x.confidence, theta);
      ASSERT_TRUE(cols.insert(x.j).second);
    }
    const ScaleEstimate s = estimate_scale(d.M0, d.M1);
    ASSERT_GE(s.s, 1.0);
    ASSERT_GE(s.s0, 1.0);
    ASSERT_GE(s.s1, 1.0);
    ASSERT_EQ(s.index, s.s1 > s.s0 ? 1 : 0);
  }
}

TEST(Property, TransposeSwapsDirections) {
  Rng rng(102);
  for (int trial = 0; trial < 100; ++trial) {
    SimilarityMatrix a;
    a.S = random_matrix(rng, 6, 6, 5.0);
    SimilarityMatrix b;
    b.S = transpose(a.S);
    const DualSoftmax da = dual_softmax_proposals(a), db = dual_softmax_proposals(b);
    ASSERT_EQ(da.M0.size(), db.M1.size());
    const ScaleEstimate sa = estimate_scale(da.M0, da.M1), sb = estimate_scale(db.M0, db.M1);
    ASSERT_EQ(sa.s0, sb.s1);
    ASSERT_EQ(sa.s1, sb.s0);
  }
}

TEST(Property, LabelsAreUnionOfProjections) {
  Rng rng(103);
  for (int trial = 0; trial < 30; ++trial) {
    const ScenePair p = make_planar_pair(trial, rng.uniform(1.0, 4.5), rng.uniform(-30, 30), 0.0);
    std::set<std::pair<int, int>> want(p.gt.from_a.begin(), p.gt.from_a.end());
    want.insert(p.gt.from_b.begin(), p.gt.from_b.end());
    const std::vector<std::pair<int, int>> union_set(want.begin(), want.end());
    ASSERT_EQ(union_set, p.gt.positives);
    std::set<int> a_sources;
    for (const auto& [i, j] : p.gt.from_a) ASSERT_TRUE(a_sources.insert(i).second);
    for (int i = 0; i < 64; ++i) ASSERT_EQ(p.gt.cov_a[i] != 0, a_sources.count(i) == 1);
  }
}

TEST(Property, LabelsDegradeGracefullyWithScale) {
  // Larger zoom-out means fewer B patches see A, more A patches per B patch.
  double last = 0.0;
  for (double s : {1.0, 2.0, 3.0, 4.0}) {
    const ScenePair p = make_planar_pair(1, s, 0.0, 0.0);
    const double m = multiplicity(p.gt.direction_view(0));
    ASSERT_GE(m, last);
    last = m;
  }
}

TEST(Property, FocalLossBoundsAndMonotone) {
  Rng rng(104);
  for (int trial = 0; trial < 200; ++trial) {
    const float p = static_cast<float>(rng.uniform(0.01, 0.99));
    const std::vector<float> a = {p}, b = {std::min(1.0f, p + 0.005f)};
    const std::vector<uint8_t> pos = {1};
    const double la = focal_loss(a, pos), lb = focal_loss(b, pos);
    ASSERT_GE(la, 0.0);
    ASSERT_LE(lb, la);
  }
}

TEST(Property, AucBoundsAndMonotone) {
  Rng rng(105);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> e(1 + rng.below(50));
    for (double& v : e) v = std::abs(rng.normal() * 10);
    const auto auc = pose_auc(e);
    for (double a : auc) {
      ASSERT_GE(a, 0.0);
      ASSERT_LE(a, 1.0);
    }
    std::vector<double> worse = e;
    for (double& v : worse) v += 1.0;
    const auto auc2 = pose_auc(worse);
    for (int k = 0; k < 3; ++k) ASSERT_LE(auc2[k], auc[k] + 1e-12);
  }
}

TEST(Property, SamplingRespectsCap) {
  Rng rng(106);
  for (int trial = 0; trial < 200; ++trial) {
    LossConfig cfg;
    cfg.sample_fraction = rng.uniform(0.01, 1.0);
    cfg.sample_cap = static_cast<int>(rng.below(50));
    const size_t n = rng.below(200);
    const auto idx = sample_supervision(n, cfg, trial);
    ASSERT_LE(idx.size(), static_cast<size_t>(cfg.sample_cap));
    ASSERT_LE(idx.size(), n);
    ASSERT_TRUE(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  }
}

TEST(Property, HomographyRoundTrip) {
  Rng rng(107);
  for (int trial = 0; trial < 100; ++trial) {
    Mat3 M = Mat3::Identity();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) M(r, c) += rng.normal() * (c == 2 ? 5.0 : 0.1);
    M(2, 0) = rng.normal() * 1e-3;
    M(2, 1) = rng.normal() * 1e-3;
    const Homography H(M);
    const Vec2 p(rng.uniform(0, 64), rng.uniform(0, 64));
    ASSERT_LT((H.inverse().apply(H.apply(p)) - p).norm(), 1e-8);
  }
}
