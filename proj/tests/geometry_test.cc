#include <cmath>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "adamatch/errors.hpp"
#include "adamatch/geometry.hpp"
#include "adamatch/synthscene.hpp"

using namespace adamatch;

namespace {

CameraFrame flat_frame(double depth, int size = 16) {
  CameraFrame f;
  f.K << size, 0, size / 2.0, 0, size, size / 2.0, 0, 0, 1;
  f.depth = Tensor({size, size}, static_cast<float>(depth));
  return f;
}

}  // namespace

TEST(Homography, ApplyAndInverse) {
  Mat3 M;
  M << 2, 0, 1, 0, 2, -1, 0, 0, 1;
  const Homography H(M);
  const Vec2 q = H.apply({1, 1});
  EXPECT_DOUBLE_EQ(q.x(), 3.0);
  EXPECT_DOUBLE_EQ(q.y(), 1.0);
  const Vec2 back = H.inverse().apply(q);
  EXPECT_NEAR(back.x(), 1.0, 1e-12);
  EXPECT_NEAR(back.y(), 1.0, 1e-12);
}

TEST(Homography, SingularAndVanishingDenominator) {
  EXPECT_THROW(Homography(Mat3::Zero()), DegenerateError);
  Mat3 M = Mat3::Identity();
  M(2, 0) = 1.0;
  M(2, 2) = 0.0;
  M(0, 2) = 1.0;
  const Homography H(M);
  EXPECT_THROW(H.apply({0.0, 0.0}), DegenerateError);
}

TEST(Project, IdentityPoseMapsToItself) {
  const CameraFrame a = flat_frame(4.0), b = flat_frame(4.0);
  const ProjectionResult r = project(a, b, {5.5, 7.25});
  ASSERT_TRUE(r.valid);
  EXPECT_NEAR(r.point.x(), 5.5, 1e-9);
  EXPECT_NEAR(r.point.y(), 7.25, 1e-9);
  EXPECT_NEAR(projected_distance(a, b, {5.5, 7.25}, {5.5, 7.25}), 0.0, 1e-9);
}

TEST(Project, MissingDepthIsInvalid) {
  CameraFrame a = flat_frame(4.0);
  const CameraFrame b = flat_frame(4.0);
  a.depth = Tensor({16, 16});
  EXPECT_FALSE(project(a, b, {5, 5}).valid);
  EXPECT_TRUE(std::isinf(projected_distance(a, b, {5, 5}, {5, 5})));
}

TEST(Project, OccludedPointIsInvalid) {
  const CameraFrame a = flat_frame(4.0);
  const CameraFrame b = flat_frame(2.0);  // B sees something much closer
  EXPECT_FALSE(project(a, b, {8, 8}).valid);
}

TEST(Project, TranslationShiftsByFocalOverDepth) {
  const CameraFrame a = flat_frame(4.0);
  CameraFrame b = flat_frame(4.0);
  b.t = Vec3(0.25, 0.0, 0.0);  // x_B = x_A + 0.25
  const ProjectionResult r = project(a, b, {8.0, 8.0}, {0.5});
  ASSERT_TRUE(r.valid);
  EXPECT_NEAR(r.point.x(), 8.0 + 16 * 0.25 / 4.0, 1e-9);
}

TEST(Epipolar, ExactCorrespondenceHasZeroError) {
  RelativePose pose;
  pose.R = rotation_from_euler_deg(10, 5, 2);
  pose.t = Vec3(1, 0.2, 0.1);
  const Mat3 E = essential_from_pose(pose);
  const Vec3 X(0.3, -0.2, 4.0);
  const Vec3 Y = pose.R * X + pose.t;
  EXPECT_NEAR(epipolar_error(E, X.hnormalized(), Y.hnormalized()), 0.0, 1e-20);
  EXPECT_GT(epipolar_error(E, X.hnormalized(), Y.hnormalized() + Vec2(0.05, 0.05)), 1e-6);
}

TEST(Epipolar, InvariantToScaleOfE) {
  RelativePose pose;
  pose.t = Vec3(1, 0, 0);
  const Mat3 E = essential_from_pose(pose);
  const Vec2 a(0.1, 0.2), b(0.15, 0.25);
  EXPECT_NEAR(epipolar_error(E, a, b), epipolar_error(7.0 * E, a, b), 1e-15);
}

TEST(Angles, RotationAndDirection) {
  EXPECT_NEAR(rotation_angle_deg(Mat3::Identity(), rotation_from_euler_deg(30, 0, 0)), 30.0, 1e-9);
  EXPECT_NEAR(direction_angle_deg(Vec3(1, 0, 0), Vec3(-1, 0, 0)), 180.0, 1e-9);
  EXPECT_NEAR(direction_angle_deg(Vec3(1, 0, 0), Vec3(-1, 0, 0), true), 0.0, 1e-9);
}

TEST(PairGeometry, PlanarRejectsOutOfImage) {
  Mat3 M = Mat3::Identity();
  M(0, 2) = 10;
  const PairGeometry g = PairGeometry::planar(Homography(M), 16, 16);
  EXPECT_TRUE(g.a_to_b({2, 2}).has_value());
  EXPECT_FALSE(g.a_to_b({8, 2}).has_value());
  EXPECT_FALSE(g.a_to_b({-1, 2}).has_value());
}

TEST(PairGeometry, StereoEssentialMatchesPose) {
  StereoParams p;
  p.profile = DepthProfile::kBumps;
  p.pose.yaw_deg = 4;
  p.pose.baseline_x = 0.1;
  const ScenePair pair = make_3d_pair(3, p);
  const auto E = pair.geometry.essential();
  ASSERT_TRUE(E.has_value());
  const Vec2 pa(20.5, 30.5);
  const auto pb = pair.geometry.a_to_b(pa);
  ASSERT_TRUE(pb.has_value());
  const Mat3& K = pair.geometry.frameA.K;
  EXPECT_LT(epipolar_error(*E, normalize_point(K, pa), normalize_point(K, *pb)), 1e-10);
}
