#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "adamatch/geometry.hpp"

namespace adamatch {

// Pixel correspondences (point in A, point in B).
using Correspondence = std::pair<Vec2, Vec2>;
using Correspondences = std::vector<Correspondence>;

struct RansacConfig {
  int iterations = 2000;
  double threshold = 3.0;  // px for homographies, epipolar error for poses
  uint64_t seed = 0;
};

// Least-squares DLT with Hartley normalization; needs >= 4 points.
// Throws DegenerateError when the solution is singular.
Homography fit_homography_dlt(const Correspondences& matches);

struct HomographyFit {
  Homography H;
  std::vector<uint8_t> inliers;
  int inlier_count = 0;
};

// Throws InsufficientDataError with fewer than 4 matches and DegenerateError
// when no sample yields a model.
HomographyFit ransac_homography(const Correspondences& matches, const RansacConfig& cfg = {});

struct EssentialFit {
  Mat3 E = Mat3::Zero();
  // Null space of the linear system has dimension > 1: the model is not
  // determined by the data (e.g. zero baseline or a planar scene).
  bool degenerate = false;
};

// Normalized 8-point algorithm on normalized camera coordinates (>= 8).
EssentialFit fit_essential(const Correspondences& normalized);

struct PoseEstimate {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();  // unit norm
  Mat3 E = Mat3::Zero();
  std::vector<uint8_t> inliers;
  int inlier_count = 0;
  bool degenerate = false;
};

// Splits E into the four (R, t) candidates and keeps the one with most
// points in front of both cameras.
std::pair<Mat3, Vec3> decompose_essential(const Mat3& E, const Correspondences& normalized);

// Default threshold is 1e-3 on epipolar_error. Throws InsufficientDataError
// with fewer than 8 matches.
PoseEstimate pose_from_matches(const Correspondences& matches, const Mat3& KA, const Mat3& KB,
                               const RansacConfig& cfg = {2000, 1e-3, 0});

// max(rotation error, unsigned translation direction error), degrees.
double pose_error_deg(const Mat3& R_est, const Vec3& t_est, const Mat3& R_gt, const Vec3& t_gt);

// (1/t) * integral_0^t recall(x) dx for the empirical recall curve. Throws on
// an empty list or negative errors.
std::vector<double> pose_auc(const std::vector<double>& errors,
                             const std::vector<double>& thresholds = {5.0, 10.0, 20.0});

struct RateResult {
  std::vector<double> rates;
  bool empty = false;
};

// Fraction of distances strictly below each threshold.
RateResult mma(const std::vector<double>& distances,
               const std::vector<double>& thresholds = {1.0, 2.0, 3.0});

double epipolar_precision(const Correspondences& matches, const Mat3& E_gt, const Mat3& KA,
                          const Mat3& KB, double threshold = 1e-4);

struct CornerResult {
  double error = 0.0;  // mean corner distance, +inf when degenerate
  std::vector<bool> pass;
  bool degenerate = false;
};

CornerResult corner_accuracy(const std::optional<Mat3>& H_est, const Homography& H_gt, int width,
                             int height, const std::vector<double>& thresholds = {1.0, 3.0, 5.0});

}  // namespace adamatch
