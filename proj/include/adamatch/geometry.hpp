#pragma once

#include <optional>

#include <Eigen/Core>
#include <Eigen/LU>

#include "adamatch/tensor.hpp"

namespace adamatch {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Pixel coordinates are continuous: the image spans [0, W) x [0, H) and the
// full-resolution sample (u, v) sits at (u + 0.5, v + 0.5).

// Pinhole view with world-to-camera pose x_cam = R * x_world + t and a dense
// depth map (0 marks missing depth).
struct CameraFrame {
  Mat3 K = Mat3::Identity();
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Tensor depth;  // H x W

  int width() const { return static_cast<int>(depth.dim(1)); }
  int height() const { return static_cast<int>(depth.dim(0)); }

  // Throws std::invalid_argument when R is not a rotation, K is malformed or
  // depth has negative entries.
  void validate() const;

  // Bilinear depth at pixel p; empty when any contributing sample is 0 or p
  // lies outside the image.
  std::optional<double> depth_at(const Vec2& p) const;

  Vec3 camera_center() const { return -R.transpose() * t; }
};

struct ProjectionResult {
  Vec2 point = Vec2::Zero();
  bool valid = false;
};

struct ProjectOptions {
  // Relative tolerance between the reprojected depth and the destination
  // depth map before a point counts as occluded.
  double depth_tolerance = 0.05;
};

ProjectionResult project(const CameraFrame& src, const CameraFrame& dst,
                         const Vec2& p, const ProjectOptions& options = {});

// Euclidean distance between the projection of pA and pB, +inf when the
// projection is invalid.
double projected_distance(const CameraFrame& src, const CameraFrame& dst,
                          const Vec2& pA, const Vec2& pB,
                          const ProjectOptions& options = {});

class Homography {
 public:
  Homography() : H_(Mat3::Identity()) {}
  // Normalizes so that H(2,2) == 1 when it is nonzero. Throws on singular H.
  explicit Homography(const Mat3& H);

  const Mat3& matrix() const { return H_; }
  Homography inverse() const { return Homography(H_.inverse()); }
  Homography operator*(const Homography& other) const {
    return Homography(H_ * other.H_);
  }

  // Throws DegenerateError when the projective denominator is ~0.
  Vec2 apply(const Vec2& p) const;

 private:
  Mat3 H_;
};

inline Vec2 homography_apply(const Homography& H, const Vec2& p) {
  return H.apply(p);
}

// Normalized camera coordinates K^-1 [p; 1].
Vec2 normalize_point(const Mat3& K, const Vec2& p);

// Symmetric epipolar distance for x_B^T E x_A = 0: the squared residual
// divided by each epipolar line's normal length, summed over both images.
// E is Frobenius-normalized first.
double epipolar_error(const Mat3& E, const Vec2& pA, const Vec2& pB);

Mat3 skew(const Vec3& v);

struct RelativePose {
  Mat3 R = Mat3::Identity();  // x_B = R x_A + t
  Vec3 t = Vec3::Zero();
};

RelativePose relative_pose(const CameraFrame& a, const CameraFrame& b);
Mat3 essential_from_pose(const RelativePose& pose);

// Angle between two rotations, degrees.
double rotation_angle_deg(const Mat3& R1, const Mat3& R2);
// Angle between two directions, degrees; sign-insensitive when `unsigned_dir`.
double direction_angle_deg(const Vec3& a, const Vec3& b, bool unsigned_dir = false);

Mat3 rotation_from_euler_deg(double yaw, double pitch, double roll);

}  // namespace adamatch
