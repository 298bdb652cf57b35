#pragma once

#include <optional>

#include "adamatch/geometry.hpp"

namespace adamatch {

enum class PairKind { kPlanar, kStereo };

// Ground-truth relation between two equally sized views: a homography for
// planar scenes, or two posed depth frames for 3-D scenes.
struct PairGeometry {
  PairKind kind = PairKind::kPlanar;
  int width = 64;
  int height = 64;
  Homography H;             // A -> B, planar only
  CameraFrame frameA;       // stereo only
  CameraFrame frameB;
  ProjectOptions project_options;

  static PairGeometry planar(const Homography& H, int width, int height);
  static PairGeometry stereo(CameraFrame a, CameraFrame b);

  bool in_image(const Vec2& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() < width && p.y() < height;
  }

  // Warps a pixel into the other view; empty when the projection is invalid
  // (outside either image, missing depth, occluded).
  std::optional<Vec2> a_to_b(const Vec2& p) const;
  std::optional<Vec2> b_to_a(const Vec2& p) const;

  // Ground-truth essential matrix (x_B^T E x_A = 0 in normalized
  // coordinates); empty for planar pairs.
  std::optional<Mat3> essential() const;
};

}  // namespace adamatch
