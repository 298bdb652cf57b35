#pragma once

#include "adamatch/covisible.hpp"
#include "adamatch/features.hpp"
#include "adamatch/matches.hpp"
#include "adamatch/tensor.hpp"

namespace adamatch {

constexpr double kDefaultMatchThreshold = 0.5;
constexpr double kDefaultTemperature = 0.1;

struct SimilarityMatrix {
  Tensor S;  // N_A x N_B
  double r = kDefaultTemperature;
};

// S[i][j] = <A_i, B_j> / r. Throws when r <= 0 or channels differ.
SimilarityMatrix similarity(const FeatureGrid& featA, const FeatureGrid& featB, double r);

enum class SelectionMode {
  kArgmax,     // each source slice keeps only its best entry, if above threshold
  kPermissive  // every entry above threshold
};

struct DualSoftmax {
  Tensor P0;  // softmax over j (rows)
  Tensor P1;  // softmax over i (columns)
  MatchSet M0, M1;
};

// Entries are kept when strictly greater than theta_m.
DualSoftmax dual_softmax_proposals(const SimilarityMatrix& sim,
                                   double theta_m = kDefaultMatchThreshold,
                                   SelectionMode mode = SelectionMode::kArgmax);

struct ScaleEstimate {
  double s0 = 1.0, s1 = 1.0;
  double s = 1.0;
  int index = 0;

  bool operator==(const ScaleEstimate& other) const = default;
};

// |M| / |distinct targets|, where targets are j for direction 0 and i for
// direction 1. Empty sets count as 1.
double multiplicity(const MatchSet& matches);

ScaleEstimate estimate_scale(const MatchSet& M0, const MatchSet& M1);

// Keeps matches whose two endpoints are both inside the masks.
MatchSet filter_covisible(const MatchSet& matches, const CoVisibleMap& cov);

struct ExternalProposals {
  MatchSet rows;     // row argmax >= theta, direction 0
  MatchSet columns;  // column argmax >= theta, direction 1
  MatchSet merged;   // union, sorted by (i, j), max confidence on duplicates
};

// Union of row and column argmax entries scoring at least theta; no
// mutual-nearest-neighbour constraint.
ExternalProposals proposals_from_external(const Tensor& scores, double theta);

}  // namespace adamatch
