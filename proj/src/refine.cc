#include "adamatch/refine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace adamatch {

namespace {

Vec2 patch_center(int index, int cols, int stride) {
  return {stride * (index % cols) + 0.5 * stride, stride * (index / cols) + 0.5 * stride};
}

bool in_grid(const Vec2& g, const FeatureGrid& grid) {
  constexpr double kSlack = 1e-9;
  return g.x() >= -kSlack && g.y() >= -kSlack && g.x() <= grid.cols() - 1 + kSlack &&
         g.y() <= grid.rows() - 1 + kSlack;
}

// Window of w x w grid points around `center` (pixels) spaced `step` pixels.
std::vector<Eigen::Vector2d> window_points(const FeatureGrid& grid, const Vec2& center, int w,
                                           double step) {
  const int h = w / 2;
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<size_t>(w) * w);
  for (int v = 0; v < w; ++v)
    for (int u = 0; u < w; ++u) pts.push_back(grid.to_grid(center + step * Vec2(u - h, v - h)));
  return pts;
}

}  // namespace

Tensor scale_align(const Tensor& patches, double s) {
  if (!(s >= 1.0)) throw std::invalid_argument("scale_align: s must be >= 1");
  if (patches.rank() != 4 || patches.dim(1) != patches.dim(2)) {
    throw std::invalid_argument("scale_align: expected n x w x w x c patches");
  }
  if (s == 1.0) return patches;
  const int64_t n = patches.dim(0), w = patches.dim(1), c = patches.dim(3);
  const double h = 0.5 * static_cast<double>(w - 1);
  std::vector<Eigen::Vector2d> pts;
  for (int64_t v = 0; v < w; ++v)
    for (int64_t u = 0; u < w; ++u) pts.emplace_back(h + (u - h) / s, h + (v - h) / s);
  Tensor out(patches.shape());
  const int64_t patch_size = w * w * c;
  for (int64_t p = 0; p < n; ++p) {
    Tensor one({w, w, c});
    std::copy(patches.raw() + p * patch_size, patches.raw() + (p + 1) * patch_size, one.raw());
    const SampleResult r = bilinear_sample(one, pts);
    std::copy(r.values.raw(), r.values.raw() + patch_size, out.raw() + p * patch_size);
  }
  return out;
}

Regression expectation_regress(std::span<const float> center, const Tensor& patch,
                               double temperature) {
  if (patch.rank() != 3 || patch.dim(0) != patch.dim(1)) {
    throw std::invalid_argument("expectation_regress: patch must be w x w x c");
  }
  if (static_cast<int64_t>(center.size()) != patch.dim(2)) {
    throw std::invalid_argument("expectation_regress: channel mismatch");
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("expectation_regress: temperature must be positive");
  const int64_t w = patch.dim(0), c = patch.dim(2);
  Tensor logits({1, w * w});
  for (int64_t k = 0; k < w * w; ++k) {
    double dot = 0.0;
    for (int64_t ch = 0; ch < c; ++ch) dot += static_cast<double>(center[ch]) * patch[k * c + ch];
    logits[k] = static_cast<float>(dot / temperature);
  }
  Regression out;
  out.heatmap = softmax(logits, 1).reshaped({w, w});
  const double h = 0.5 * static_cast<double>(w - 1);
  double ex = 0.0, ey = 0.0;
  for (int64_t k = 0; k < w * w; ++k) {
    ex += out.heatmap[k] * (k % w - h);
    ey += out.heatmap[k] * (k / w - h);
  }
  double var = 0.0;
  for (int64_t k = 0; k < w * w; ++k) {
    const double dx = k % w - h - ex, dy = k / w - h - ey;
    var += out.heatmap[k] * (dx * dx + dy * dy);
  }
  out.offset = {ex, ey};
  out.variance = var;
  return out;
}

double default_refine_temperature(double scale, int channels) {
  return std::min(2.0 * std::max(scale, 1.0), std::sqrt(static_cast<double>(channels)));
}

RefineResult refine_matches(const MatchSet& proposals, const FeatureGrid& fineA,
                            const FeatureGrid& fineB, const ScaleEstimate& scale,
                            const ModelWeights& weights, const RefineConfig& cfg,
                            int coarse_stride) {
  if (cfg.window <= 0 || cfg.window % 2 == 0) {
    throw std::invalid_argument("refine_matches: window must be odd and positive");
  }
  if (fineA.channels() != fineB.channels() || fineA.stride != fineB.stride) {
    throw std::invalid_argument("refine_matches: fine grids differ in channels or stride");
  }
  const int w = cfg.window, c = fineA.channels();
  const double step = fineA.stride;
  const double temperature =
      cfg.temperature > 0.0 ? cfg.temperature : default_refine_temperature(scale.s, c);
  const int dir = proposals.direction;
  const FeatureGrid& fixed = dir == 0 ? fineA : fineB;
  const FeatureGrid& moving = dir == 0 ? fineB : fineA;
  const int cols = fineA.cols() * fineA.stride / coarse_stride;
  const int cells = cols * (fineA.rows() * fineA.stride / coarse_stride);

  RefineResult result;
  result.stats.proposals = static_cast<int>(proposals.size());

  // Group surviving proposals by their target patch.
  std::map<int, std::vector<size_t>> groups;
  for (size_t n = 0; n < proposals.size(); ++n) {
    const PatchMatch& m = proposals.pairs[n];
    if (m.i < 0 || m.j < 0 || m.i >= cells || m.j >= cells) {
      throw std::invalid_argument("refine_matches: proposal index outside the coarse grid");
    }
    const int src = dir == 0 ? m.i : m.j, dst = dir == 0 ? m.j : m.i;
    const Vec2 target = patch_center(dst, cols, coarse_stride);
    const int h = w / 2;
    const bool ok = in_grid(fixed.to_grid(patch_center(src, cols, coarse_stride)), fixed) &&
                    in_grid(moving.to_grid(target + step * Vec2(-h, -h)), moving) &&
                    in_grid(moving.to_grid(target + step * Vec2(h, h)), moving);
    if (!ok) {
      ++result.stats.discarded;
      continue;
    }
    groups[dst].push_back(n);
  }

  std::vector<std::pair<size_t, RefinedMatch>> out;
  for (const auto& [dst, members] : groups) {
    const Vec2 target = patch_center(dst, cols, coarse_stride);
    const auto pts = window_points(moving, target, w, step);
    const Tensor window = bilinear_sample(moving.map, pts).values.reshaped({w, w, c});

    std::vector<Eigen::Vector2d> centers;
    for (size_t n : members) {
      const PatchMatch& m = proposals.pairs[n];
      centers.push_back(fixed.to_grid(patch_center(dir == 0 ? m.i : m.j, cols, coarse_stride)));
    }
    Tensor queries = bilinear_sample(fixed.map, centers).values;  // m x c

    if (cfg.group_attention) {
      const Tensor aligned = scale_align(window.reshaped({1, w, w, c}), scale.s);
      const Tensor context = aligned.reshaped({w * w, c});
      const int heads = weights.dims.heads;
      const AttentionKind kind = weights.dims.attention;
      queries = transformer_layer(queries, queries, weights, "refine.self", heads, kind);
      queries = transformer_layer(queries, context, weights, "refine.cross", heads, kind);
    }

    for (size_t k = 0; k < members.size(); ++k) {
      const PatchMatch& m = proposals.pairs[members[k]];
      const Regression reg = expectation_regress(
          std::span<const float>(queries.raw() + k * c, static_cast<size_t>(c)), window,
          temperature);
      RefinedMatch rm;
      rm.i = m.i;
      rm.j = m.j;
      rm.direction = dir;
      rm.confidence = m.confidence;
      rm.variance = reg.variance * step * step;
      const Vec2 src_point = patch_center(dir == 0 ? m.i : m.j, cols, coarse_stride);
      const Vec2 refined = target + step * reg.offset;
      rm.pA = dir == 0 ? src_point : refined;
      rm.pB = dir == 0 ? refined : src_point;
      out.emplace_back(members[k], rm);
    }
  }
  // Restore proposal order.
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [n, rm] : out) result.matches.push_back(rm);
  return result;
}

}  // namespace adamatch
