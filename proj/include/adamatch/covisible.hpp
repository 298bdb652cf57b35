#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adamatch/cfi.hpp"
#include "adamatch/features.hpp"
#include "adamatch/labels.hpp"

namespace adamatch {

constexpr double kDefaultCovisibleThreshold = 0.2;

struct CoVisibleMap {
  int rows = 0, cols = 0;
  Tensor probA, probB;  // rows x cols
  double threshold = kDefaultCovisibleThreshold;
  std::vector<uint8_t> maskA, maskB;  // row-major cells
};

// P = sigmoid(conv2(relu(conv1(sigmoid(F q^T) * F + F)))), returned as h x w.
Tensor covisible_head(const FeatureGrid& feat, const Tensor& query, const ModelWeights& weights);

// mask[i] = prob[i] >= theta. theta must lie in [0, 1].
std::vector<uint8_t> threshold_mask(const Tensor& prob, double theta);

CoVisibleMap make_covisible_map(Tensor probA, Tensor probB, double theta);

// Ground-truth masks as a map with 0/1 probabilities.
CoVisibleMap covisible_from_labels(const GroundTruthLabels& labels);

// Binary PGM (P5), 255 for true cells.
std::string mask_to_pgm(const std::vector<uint8_t>& mask, int rows, int cols);

}  // namespace adamatch
