#include "adamatch/covisible.hpp"

#include <stdexcept>

namespace adamatch {

Tensor covisible_head(const FeatureGrid& feat, const Tensor& query, const ModelWeights& weights) {
  const int c = feat.channels();
  if (query.size() != c) {
    throw std::invalid_argument("covisible_head: query width " + std::to_string(query.size()) +
                                " != feature channels " + std::to_string(c));
  }
  const Tensor tokens = feat.tokens();
  const Tensor gate = sigmoid(matmul_transposed(tokens, query.reshaped({1, c})));  // n x 1
  Tensor enhanced(tokens.shape());
  for (int64_t i = 0; i < tokens.dim(0); ++i) {
    const float g = gate[i];
    for (int64_t k = 0; k < c; ++k) enhanced.at(i, k) = g * tokens.at(i, k) + tokens.at(i, k);
  }
  const Tensor map = enhanced.reshaped(feat.map.shape());
  const Tensor hidden =
      relu(conv2d(map, weights.get("covis.conv1.weight"), weights.get("covis.conv1.bias")));
  const Tensor logits =
      conv2d(hidden, weights.get("covis.conv2.weight"), weights.get("covis.conv2.bias"));
  return sigmoid(logits).reshaped({feat.rows(), feat.cols()});
}

std::vector<uint8_t> threshold_mask(const Tensor& prob, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("threshold_mask: theta must lie in [0, 1]");
  }
  std::vector<uint8_t> mask(prob.size());
  for (int64_t i = 0; i < prob.size(); ++i) mask[i] = prob[i] >= theta ? 1 : 0;
  return mask;
}

CoVisibleMap make_covisible_map(Tensor probA, Tensor probB, double theta) {
  if (probA.rank() != 2 || probA.shape() != probB.shape()) {
    throw std::invalid_argument("make_covisible_map: probability maps must be equal-shape matrices");
  }
  CoVisibleMap map;
  map.rows = static_cast<int>(probA.dim(0));
  map.cols = static_cast<int>(probA.dim(1));
  map.threshold = theta;
  map.maskA = threshold_mask(probA, theta);
  map.maskB = threshold_mask(probB, theta);
  map.probA = std::move(probA);
  map.probB = std::move(probB);
  return map;
}

CoVisibleMap covisible_from_labels(const GroundTruthLabels& labels) {
  if (labels.rows_a != labels.rows_b || labels.cols_a != labels.cols_b) {
    throw std::invalid_argument("covisible_from_labels: grids differ in shape");
  }
  Tensor a({labels.rows_a, labels.cols_a}), b({labels.rows_b, labels.cols_b});
  for (int i = 0; i < labels.cells_a(); ++i) a[i] = labels.cov_a[i];
  for (int j = 0; j < labels.cells_b(); ++j) b[j] = labels.cov_b[j];
  return make_covisible_map(std::move(a), std::move(b), 0.5);
}

std::string mask_to_pgm(const std::vector<uint8_t>& mask, int rows, int cols) {
  if (static_cast<int64_t>(mask.size()) != static_cast<int64_t>(rows) * cols) {
    throw std::invalid_argument("mask_to_pgm: size mismatch");
  }
  std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  for (uint8_t m : mask) out.push_back(static_cast<char>(m ? 255 : 0));
  return out;
}

}  // namespace adamatch
