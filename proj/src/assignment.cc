#include "adamatch/assignment.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace adamatch {

namespace {

// First index of the largest value in slice `s` of matrix P along `axis`.
int64_t slice_argmax(const Tensor& P, int axis, int64_t s) {
  const int64_t n = P.dim(axis == 1 ? 1 : 0);
  int64_t best = 0;
  float best_v = axis == 1 ? P.at(s, 0) : P.at(0, s);
  for (int64_t t = 1; t < n; ++t) {
    const float v = axis == 1 ? P.at(s, t) : P.at(t, s);
    if (v > best_v) {
      best_v = v;
      best = t;
    }
  }
  return best;
}

MatchSet select(const Tensor& P, int direction, double theta, SelectionMode mode) {
  MatchSet out;
  out.direction = direction;
  const int64_t sources = direction == 0 ? P.dim(0) : P.dim(1);
  const int64_t targets = direction == 0 ? P.dim(1) : P.dim(0);
  if (targets == 0) return out;
  for (int64_t s = 0; s < sources; ++s) {
    auto emit = [&](int64_t t) {
      const int i = static_cast<int>(direction == 0 ? s : t);
      const int j = static_cast<int>(direction == 0 ? t : s);
      const float p = P.at(i, j);
      if (p > theta) out.pairs.push_back({i, j, p});
    };
    if (mode == SelectionMode::kArgmax) {
      emit(slice_argmax(P, direction == 0 ? 1 : 0, s));
    } else {
      for (int64_t t = 0; t < targets; ++t) emit(t);
    }
  }
  if (direction == 1) {
    std::sort(out.pairs.begin(), out.pairs.end(), [](const PatchMatch& a, const PatchMatch& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
  }
  return out;
}

}  // namespace

SimilarityMatrix similarity(const FeatureGrid& featA, const FeatureGrid& featB, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("similarity: temperature r must be positive");
  if (featA.channels() != featB.channels()) {
    throw std::invalid_argument("similarity: channel mismatch");
  }
  SimilarityMatrix out;
  out.r = r;
  out.S = scale(matmul_transposed(featA.tokens(), featB.tokens()), static_cast<float>(1.0 / r));
  return out;
}

DualSoftmax dual_softmax_proposals(const SimilarityMatrix& sim, double theta_m,
                                   SelectionMode mode) {
  DualSoftmax out;
  out.P0 = softmax(sim.S, 1);
  out.P1 = softmax(sim.S, 0);
  out.M0 = select(out.P0, 0, theta_m, mode);
  out.M1 = select(out.P1, 1, theta_m, mode);
  return out;
}

double multiplicity(const MatchSet& matches) {
  if (matches.empty()) return 1.0;
  std::set<int> targets;
  for (const PatchMatch& m : matches.pairs) targets.insert(matches.direction == 0 ? m.j : m.i);
  return static_cast<double>(matches.size()) / static_cast<double>(targets.size());
}

ScaleEstimate estimate_scale(const MatchSet& M0, const MatchSet& M1) {
  ScaleEstimate est;
  est.s0 = multiplicity(M0);
  est.s1 = multiplicity(M1);
  est.s = std::max(est.s0 / est.s1, est.s1 / est.s0);
  est.index = est.s1 > est.s0 ? 1 : 0;
  return est;
}

MatchSet filter_covisible(const MatchSet& matches, const CoVisibleMap& cov) {
  MatchSet out;
  out.direction = matches.direction;
  const int na = static_cast<int>(cov.maskA.size()), nb = static_cast<int>(cov.maskB.size());
  for (const PatchMatch& m : matches.pairs) {
    if (m.i < 0 || m.i >= na || m.j < 0 || m.j >= nb) {
      throw std::invalid_argument("filter_covisible: match index outside the mask grid");
    }
    if (cov.maskA[m.i] && cov.maskB[m.j]) out.pairs.push_back(m);
  }
  return out;
}

ExternalProposals proposals_from_external(const Tensor& scores, double theta) {
  if (scores.rank() != 2) throw std::invalid_argument("proposals_from_external: scores must be a matrix");
  ExternalProposals out;
  out.rows.direction = 0;
  out.columns.direction = 1;
  if (scores.dim(0) == 0 || scores.dim(1) == 0) return out;
  std::map<std::pair<int, int>, float> merged;
  auto keep = [&](int i, int j, MatchSet& set) {
    const float v = scores.at(i, j);
    if (!(v >= theta)) return;
    set.pairs.push_back({i, j, v});
    auto [it, inserted] = merged.emplace(std::make_pair(i, j), v);
    if (!inserted) it->second = std::max(it->second, v);
  };
  for (int64_t i = 0; i < scores.dim(0); ++i) {
    keep(static_cast<int>(i), static_cast<int>(slice_argmax(scores, 1, i)), out.rows);
  }
  for (int64_t j = 0; j < scores.dim(1); ++j) {
    keep(static_cast<int>(slice_argmax(scores, 0, j)), static_cast<int>(j), out.columns);
  }
  std::sort(out.columns.pairs.begin(), out.columns.pairs.end(),
            [](const PatchMatch& a, const PatchMatch& b) {
              return a.i != b.i ? a.i < b.i : a.j < b.j;
            });
  out.merged.direction = 0;
  for (const auto& [key, v] : merged) out.merged.pairs.push_back({key.first, key.second, v});
  return out;
}

}  // namespace adamatch
