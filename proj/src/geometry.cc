#include "adamatch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "adamatch/errors.hpp"
#include "adamatch/pair_geometry.hpp"

namespace adamatch {

void CameraFrame::validate() const {
  if (depth.rank() != 2) {
    throw std::invalid_argument("CameraFrame: depth must be H x W");
  }
  if ((R.transpose() * R - Mat3::Identity()).norm() > 1e-6 ||
      std::abs(R.determinant() - 1.0) > 1e-6) {
    throw std::invalid_argument("CameraFrame: R is not a rotation");
  }
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0 ||
      !(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) {
    throw std::invalid_argument("CameraFrame: K must be upper triangular with positive focals");
  }
  for (float d : depth.data()) {
    if (!(d >= 0.0f)) throw std::invalid_argument("CameraFrame: negative depth");
  }
}

std::optional<double> CameraFrame::depth_at(const Vec2& p) const {
  const int w = width(), h = height();
  if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() < w && p.y() < h)) return std::nullopt;
  const double gx = std::clamp(p.x() - 0.5, 0.0, static_cast<double>(w - 1));
  const double gy = std::clamp(p.y() - 0.5, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(gx), w - 1);
  const int y0 = std::min(static_cast<int>(gy), h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double d00 = depth.at(y0, x0), d01 = depth.at(y0, x1);
  const double d10 = depth.at(y1, x0), d11 = depth.at(y1, x1);
  if (d00 <= 0.0 || d01 <= 0.0 || d10 <= 0.0 || d11 <= 0.0) return std::nullopt;
  const double fx = gx - x0, fy = gy - y0;
  return (1 - fx) * (1 - fy) * d00 + fx * (1 - fy) * d01 + (1 - fx) * fy * d10 +
         fx * fy * d11;
}

ProjectionResult project(const CameraFrame& src, const CameraFrame& dst,
                         const Vec2& p, const ProjectOptions& options) {
  ProjectionResult result;
  const std::optional<double> z = src.depth_at(p);
  if (!z) return result;

  const Vec3 ray = src.K.inverse() * Vec3(p.x(), p.y(), 1.0);
  const Vec3 x_src = ray * *z;
  const Vec3 x_world = src.R.transpose() * (x_src - src.t);
  const Vec3 x_dst = dst.R * x_world + dst.t;
  if (x_dst.z() <= 0.0) return result;

  const Vec3 hom = dst.K * x_dst;
  result.point = hom.head<2>() / hom.z();
  const std::optional<double> z_dst = dst.depth_at(result.point);
  if (!z_dst) return result;
  if (std::abs(*z_dst - x_dst.z()) > options.depth_tolerance * *z_dst) return result;
  result.valid = true;
  return result;
}

double projected_distance(const CameraFrame& src, const CameraFrame& dst,
                          const Vec2& pA, const Vec2& pB,
                          const ProjectOptions& options) {
  const ProjectionResult proj = project(src, dst, pA, options);
  if (!proj.valid) return std::numeric_limits<double>::infinity();
  return (proj.point - pB).norm();
}

Homography::Homography(const Mat3& H) : H_(H) {
  if (!H_.allFinite() || !(std::abs(H_.determinant()) > 1e-15 * std::pow(H_.norm(), 3))) {
    throw DegenerateError("Homography: singular matrix");
  }
  if (std::abs(H_(2, 2)) > 1e-12) H_ /= H_(2, 2);
}

Vec2 Homography::apply(const Vec2& p) const {
  const Vec3 q = H_ * Vec3(p.x(), p.y(), 1.0);
  if (std::abs(q.z()) < 1e-12) {
    throw DegenerateError("homography_apply: point maps to infinity");
  }
  return q.head<2>() / q.z();
}

Vec2 normalize_point(const Mat3& K, const Vec2& p) {
  const Vec3 q = K.inverse() * Vec3(p.x(), p.y(), 1.0);
  return q.head<2>() / q.z();
}

double epipolar_error(const Mat3& E, const Vec2& pA, const Vec2& pB) {
  const double norm = E.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("epipolar_error: zero matrix");
  const Mat3 En = E / norm;
  const Vec3 xa(pA.x(), pA.y(), 1.0), xb(pB.x(), pB.y(), 1.0);
  const Vec3 line_b = En * xa;
  const Vec3 line_a = En.transpose() * xb;
  const double residual = xb.dot(line_b);
  const double na = line_a.head<2>().squaredNorm();
  const double nb = line_b.head<2>().squaredNorm();
  const double r2 = residual * residual;
  if (r2 == 0.0) return 0.0;
  constexpr double kTiny = 1e-300;
  return r2 * (1.0 / std::max(na, kTiny) + 1.0 / std::max(nb, kTiny));
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

RelativePose relative_pose(const CameraFrame& a, const CameraFrame& b) {
  RelativePose pose;
  pose.R = b.R * a.R.transpose();
  pose.t = b.t - pose.R * a.t;
  return pose;
}

Mat3 essential_from_pose(const RelativePose& pose) { return skew(pose.t) * pose.R; }

double rotation_angle_deg(const Mat3& R1, const Mat3& R2) {
  const double c = std::clamp(((R1.transpose() * R2).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

double direction_angle_deg(const Vec3& a, const Vec3& b, bool unsigned_dir) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 180.0;
  double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  if (unsigned_dir) c = std::abs(c);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

Mat3 rotation_from_euler_deg(double yaw, double pitch, double roll) {
  const double k = std::numbers::pi / 180.0;
  return (Eigen::AngleAxisd(yaw * k, Vec3::UnitY()) *
          Eigen::AngleAxisd(pitch * k, Vec3::UnitX()) *
          Eigen::AngleAxisd(roll * k, Vec3::UnitZ()))
      .toRotationMatrix();
}

PairGeometry PairGeometry::planar(const Homography& H, int width, int height) {
  PairGeometry g;
  g.kind = PairKind::kPlanar;
  g.H = H;
  g.width = width;
  g.height = height;
  return g;
}

PairGeometry PairGeometry::stereo(CameraFrame a, CameraFrame b) {
  a.validate();
  b.validate();
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("PairGeometry: frames must share image size");
  }
  PairGeometry g;
  g.kind = PairKind::kStereo;
  g.width = a.width();
  g.height = a.height();
  g.frameA = std::move(a);
  g.frameB = std::move(b);
  return g;
}

namespace {

std::optional<Vec2> warp_planar(const PairGeometry& g, const Homography& H,
                                const Vec2& p) {
  if (!g.in_image(p)) return std::nullopt;
  const Vec3 q = H.matrix() * Vec3(p.x(), p.y(), 1.0);
  if (q.z() <= 1e-12) return std::nullopt;
  const Vec2 out = q.head<2>() / q.z();
  if (!g.in_image(out)) return std::nullopt;
  return out;
}

}  // namespace

std::optional<Vec2> PairGeometry::a_to_b(const Vec2& p) const {
  if (kind == PairKind::kPlanar) return warp_planar(*this, H, p);
  const ProjectionResult r = project(frameA, frameB, p, project_options);
  if (!r.valid) return std::nullopt;
  return r.point;
}

std::optional<Vec2> PairGeometry::b_to_a(const Vec2& p) const {
  if (kind == PairKind::kPlanar) return warp_planar(*this, H.inverse(), p);
  const ProjectionResult r = project(frameB, frameA, p, project_options);
  if (!r.valid) return std::nullopt;
  return r.point;
}

std::optional<Mat3> PairGeometry::essential() const {
  if (kind != PairKind::kStereo) return std::nullopt;
  return essential_from_pose(relative_pose(frameA, frameB));
}

}  // namespace adamatch
