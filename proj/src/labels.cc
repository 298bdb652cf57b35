#include "adamatch/labels.hpp"

#include <algorithm>
#include <stdexcept>

namespace adamatch {

namespace {

// Cell index of a pixel for a grid of `cols` x `rows` cells of `patch` px.
int bucket(const Vec2& p, int patch, int rows, int cols) {
  if (!(p.x() >= 0.0 && p.y() >= 0.0)) return -1;
  const int col = static_cast<int>(p.x() / patch);
  const int row = static_cast<int>(p.y() / patch);
  if (col >= cols || row >= rows) return -1;
  return row * cols + col;
}

Vec2 centroid(int index, int patch, int cols) {
  return {patch * (index % cols) + 0.5 * patch, patch * (index / cols) + 0.5 * patch};
}

}  // namespace

bool GroundTruthLabels::contains(int i, int j) const {
  return std::binary_search(positives.begin(), positives.end(), std::make_pair(i, j));
}

Tensor GroundTruthLabels::dense() const {
  Tensor out({cells_a(), cells_b()});
  for (const auto& [i, j] : positives) out.at(i, j) = 1.0f;
  return out;
}

MatchSet GroundTruthLabels::direction_view(int k) const {
  if (k != 0 && k != 1) throw std::invalid_argument("direction_view: k must be 0 or 1");
  MatchSet set;
  set.direction = k;
  for (const auto& [i, j] : (k == 0 ? from_a : from_b)) set.pairs.push_back({i, j, 1.0f});
  return set;
}

GroundTruthLabels generate_labels(const PairGeometry& geometry, int patch_size) {
  if (patch_size <= 0) throw std::invalid_argument("generate_labels: patch_size must be positive");
  GroundTruthLabels labels;
  labels.patch_size = patch_size;
  labels.rows_a = labels.rows_b = geometry.height / patch_size;
  labels.cols_a = labels.cols_b = geometry.width / patch_size;
  labels.cov_a.assign(labels.cells_a(), 0);
  labels.cov_b.assign(labels.cells_b(), 0);

  for (int i = 0; i < labels.cells_a(); ++i) {
    const auto q = geometry.a_to_b(centroid(i, patch_size, labels.cols_a));
    if (!q) continue;
    const int j = bucket(*q, patch_size, labels.rows_b, labels.cols_b);
    if (j < 0) continue;
    labels.cov_a[i] = 1;
    labels.from_a.emplace_back(i, j);
  }
  for (int j = 0; j < labels.cells_b(); ++j) {
    const auto p = geometry.b_to_a(centroid(j, patch_size, labels.cols_b));
    if (!p) continue;
    const int i = bucket(*p, patch_size, labels.rows_a, labels.cols_a);
    if (i < 0) continue;
    labels.cov_b[j] = 1;
    labels.from_b.emplace_back(i, j);
  }

  labels.positives = labels.from_a;
  labels.positives.insert(labels.positives.end(), labels.from_b.begin(), labels.from_b.end());
  std::sort(labels.positives.begin(), labels.positives.end());
  labels.positives.erase(std::unique(labels.positives.begin(), labels.positives.end()),
                         labels.positives.end());
  return labels;
}

std::vector<FineTarget> gt_matches_fine(const MatchSet& proposals,
                                        const PairGeometry& geometry,
                                        int patch_size) {
  const int cols = geometry.width / patch_size;
  const int rows = geometry.height / patch_size;
  std::vector<FineTarget> targets;
  targets.reserve(proposals.size());
  for (const PatchMatch& m : proposals.pairs) {
    if (m.i < 0 || m.j < 0 || m.i >= rows * cols || m.j >= rows * cols) {
      throw std::invalid_argument("gt_matches_fine: proposal index out of range");
    }
    FineTarget target;
    std::optional<Vec2> q;
    if (proposals.direction == 0) {
      target.image = 1;
      q = geometry.a_to_b(centroid(m.i, patch_size, cols));
    } else {
      target.image = 0;
      q = geometry.b_to_a(centroid(m.j, patch_size, cols));
    }
    if (q) {
      target.point = *q;
      target.valid = true;
    }
    targets.push_back(target);
  }
  return targets;
}

}  // namespace adamatch
