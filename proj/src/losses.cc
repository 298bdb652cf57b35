#include "adamatch/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adamatch/rng.hpp"

namespace adamatch {

namespace {
constexpr double kLogFloor = 1e-12;
constexpr double kVarianceFloor = 1e-6;
}  // namespace

void LossConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("LossConfig: alpha must be in (0, 1)");
  if (!(gamma >= 0.0)) throw std::invalid_argument("LossConfig: gamma must be >= 0");
  if (!(w_cov >= 0.0 && w_match >= 0.0 && w_refine >= 0.0)) {
    throw std::invalid_argument("LossConfig: weights must be >= 0");
  }
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0) || sample_cap < 0) {
    throw std::invalid_argument("LossConfig: bad sampling rule");
  }
}

double focal_loss(std::span<const float> pred, std::span<const uint8_t> target,
                  const LossConfig& cfg) {
  if (pred.size() != target.size()) throw std::invalid_argument("focal_loss: size mismatch");
  if (pred.empty()) return 0.0;
  double acc = 0.0;
  for (size_t k = 0; k < pred.size(); ++k) {
    const double p = pred[k];
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("focal_loss: prediction outside [0, 1]");
    const double pt = target[k] ? p : 1.0 - p;
    const double term = cfg.gamma == 0.0 ? 1.0 : std::pow(1.0 - pt, cfg.gamma);
    acc += -cfg.alpha * term * std::log(std::max(pt, kLogFloor));
  }
  return acc / static_cast<double>(pred.size());
}

RefineLoss refine_loss(const std::vector<RefinedMatch>& refined,
                       const std::vector<FineTarget>& targets) {
  if (refined.size() != targets.size()) throw std::invalid_argument("refine_loss: size mismatch");
  RefineLoss out;
  double acc = 0.0;
  for (size_t k = 0; k < refined.size(); ++k) {
    if (!targets[k].valid) continue;
    const RefinedMatch& m = refined[k];
    const Vec2& moving = m.direction == 0 ? m.pB : m.pA;
    acc += (moving - targets[k].point).norm() / std::max(m.variance, kVarianceFloor);
    ++out.count;
  }
  out.empty = out.count == 0;
  out.value = out.empty ? 0.0 : acc / out.count;
  return out;
}

double total_loss(double cov, double match, double refine, const LossConfig& cfg) {
  return cfg.w_cov * cov + cfg.w_match * match + cfg.w_refine * refine;
}

std::vector<size_t> sample_supervision(size_t n, const LossConfig& cfg, uint64_t seed) {
  const size_t want = std::min<size_t>(
      static_cast<size_t>(std::ceil(cfg.sample_fraction * static_cast<double>(n) - 1e-9)),
      static_cast<size_t>(cfg.sample_cap));
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates.
  Rng rng(seed);
  for (size_t k = 0; k < want; ++k) {
    const size_t pick = k + static_cast<size_t>(rng.below(n - k));
    std::swap(idx[k], idx[pick]);
  }
  idx.resize(want);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double finite_difference_probe(const std::function<double(const std::vector<float>&)>& f,
                               std::vector<float> input, size_t index, double h) {
  if (index >= input.size()) throw std::invalid_argument("finite_difference_probe: index out of range");
  const float x = input[index];
  input[index] = static_cast<float>(x + h);
  const double up = f(input);
  input[index] = static_cast<float>(x - h);
  const double down = f(input);
  return (up - down) / (2.0 * h);
}

}  // namespace adamatch
