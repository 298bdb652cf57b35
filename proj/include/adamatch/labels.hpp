#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "adamatch/matches.hpp"
#include "adamatch/pair_geometry.hpp"
#include "adamatch/tensor.hpp"

namespace adamatch {

// Patch-level ground truth for one pair.
struct GroundTruthLabels {
  int patch_size = 8;
  int rows_a = 0, cols_a = 0;
  int rows_b = 0, cols_b = 0;

  // Sorted, unique positive entries of the adaptive assignment matrix: the
  // union of both projection directions.
  std::vector<std::pair<int, int>> positives;
  // A centroid i lands in B patch j (one entry per valid A centroid).
  std::vector<std::pair<int, int>> from_a;
  // B centroid j lands in A patch i (one entry per valid B centroid).
  std::vector<std::pair<int, int>> from_b;

  std::vector<uint8_t> cov_a;  // rows_a * cols_a
  std::vector<uint8_t> cov_b;

  int cells_a() const { return rows_a * cols_a; }
  int cells_b() const { return rows_b * cols_b; }
  bool contains(int i, int j) const;
  // N_A x N_B matrix of 0/1.
  Tensor dense() const;
  // from_a as a direction-0 match set, from_b as direction 1.
  MatchSet direction_view(int k) const;

  bool operator==(const GroundTruthLabels& other) const = default;
};

// Projects every patch centroid into the other view and buckets it with
// floor(coordinate / patch_size).
GroundTruthLabels generate_labels(const PairGeometry& geometry, int patch_size);

struct FineTarget {
  Vec2 point = Vec2::Zero();
  bool valid = false;
  // Image the target lives in: 1 for B (direction-0 proposals), 0 for A.
  int image = 1;
};

// Exact continuous projection of each proposal's fixed patch center into the
// other image. Direction-0 proposals keep the A center fixed.
std::vector<FineTarget> gt_matches_fine(const MatchSet& proposals,
                                        const PairGeometry& geometry,
                                        int patch_size);

}  // namespace adamatch
