#pragma once

#include <span>
#include <vector>

#include "adamatch/assignment.hpp"
#include "adamatch/cfi.hpp"
#include "adamatch/features.hpp"
#include "adamatch/matches.hpp"

namespace adamatch {

struct RefineConfig {
  int window = 5;             // odd, in fine-grid steps
  // Heatmap logits = dot / temperature. <= 0 picks min(2 s, sqrt(c)) from the
  // scale estimate s: near s = 1 neighbouring window cells are strongly
  // correlated and a soft heatmap drifts off the peak.
  double temperature = 0.0;
  bool group_attention = true;
};

struct RefinedMatch {
  Vec2 pA = Vec2::Zero();
  Vec2 pB = Vec2::Zero();
  float confidence = 0.0f;
  double variance = 0.0;  // px^2 at full resolution
  int i = 0, j = 0;
  int direction = 0;      // 0: pA fixed, pB regressed; 1: the reverse

  bool operator==(const RefinedMatch& other) const = default;
};

struct RefineStats {
  int proposals = 0;
  int discarded = 0;  // windows crossing the border of the fine grid
};

struct RefineResult {
  std::vector<RefinedMatch> matches;
  RefineStats stats;
};

// patches: n x w x w x c. Resamples every patch on a grid shrunk by s about
// its center (bilinear), i.e. zooms in by s. Throws when s < 1.
Tensor scale_align(const Tensor& patches, double s);

struct Regression {
  Vec2 offset = Vec2::Zero();  // grid steps from the window center, (x, y)
  double variance = 0.0;       // grid steps^2
  Tensor heatmap;              // w x w
};

// Softmax over the w*w window of dot(center, patch[v][u]) / temperature,
// then expectation and spread of the cell coordinates.
Regression expectation_regress(std::span<const float> center, const Tensor& patch,
                               double temperature);

double default_refine_temperature(double scale, int channels);

// Keeps the source patch center of every proposal fixed and regresses its
// position inside a window around the target patch center. Proposals sharing
// a target form one group whose queries pass through one self and one cross
// attention layer against the scale-aligned target window.
RefineResult refine_matches(const MatchSet& proposals, const FeatureGrid& fineA,
                            const FeatureGrid& fineB, const ScaleEstimate& scale,
                            const ModelWeights& weights, const RefineConfig& cfg,
                            int coarse_stride = 8);

}  // namespace adamatch
