#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "adamatch/labels.hpp"
#include "adamatch/refine.hpp"
#include "adamatch/tensor.hpp"

namespace adamatch {

struct LossConfig {
  double alpha = 0.25;
  double gamma = 2.0;
  double w_cov = 0.5;
  double w_match = 1.0;
  double w_refine = 1.0;
  double sample_fraction = 0.3;
  int sample_cap = 2500;
  // Supervise both P0 and P1 instead of only the selected direction.
  bool match_both_directions = false;

  void validate() const;
};

// Mean of -alpha (1 - p_t)^gamma log(p_t); p_t = p on positives, 1 - p on
// negatives. Throws if any p is outside [0, 1] or sizes differ.
double focal_loss(std::span<const float> pred, std::span<const uint8_t> target,
                  const LossConfig& cfg = {});

struct RefineLoss {
  double value = 0.0;
  int count = 0;       // valid targets used
  bool empty = false;  // no valid target; value is 0
};

// Mean over valid targets of |moving point - target| / max(variance, 1e-6).
// refined[k] pairs with targets[k].
RefineLoss refine_loss(const std::vector<RefinedMatch>& refined,
                       const std::vector<FineTarget>& targets);

double total_loss(double cov, double match, double refine, const LossConfig& cfg = {});

// min(ceil(fraction * n), cap) distinct indices in ascending order.
std::vector<size_t> sample_supervision(size_t n, const LossConfig& cfg, uint64_t seed);

// Central difference of f with respect to input[index].
double finite_difference_probe(const std::function<double(const std::vector<float>&)>& f,
                               std::vector<float> input, size_t index, double h = 1e-3);

}  // namespace adamatch
