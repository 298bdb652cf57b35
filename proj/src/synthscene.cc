#include "adamatch/synthscene.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace adamatch {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum SeedStream : uint64_t {
  kCoarseField = 1,
  kFineField = 2,
  kNoise = 3,
  kSurface = 4,
  kBucket = 5,
};

// Maps a pixel of one view to coordinates on the descriptor field, or empty
// when nothing is observed there.
using FieldCoordinate = std::function<std::optional<Vec2>(const Vec2&)>;

FeatureGrid sample_grid(const DescriptorField& field, const FieldCoordinate& coord,
                        int width, int height, int stride, double noise_sigma,
                        Rng* noise) {
  const int rows = height / stride, cols = width / stride;
  FeatureGrid grid(Tensor({rows, cols, field.channels()}), stride);
  for (int idx = 0; idx < rows * cols; ++idx) {
    float* dst = grid.map.raw() + static_cast<int64_t>(idx) * field.channels();
    if (const auto u = coord(grid.cell_center(idx))) {
      field.evaluate(*u, dst);
      // Constant norm sqrt(C), as for L2-normalized descriptors.
      double norm2 = 0.0;
      for (int c = 0; c < field.channels(); ++c) norm2 += double(dst[c]) * dst[c];
      if (norm2 > 0.0) {
        const double k = std::sqrt(field.channels() / norm2);
        for (int c = 0; c < field.channels(); ++c) dst[c] = static_cast<float>(dst[c] * k);
      }
    }
    if (noise != nullptr && noise_sigma > 0.0) {
      for (int c = 0; c < field.channels(); ++c) {
        const double n = std::clamp(noise->normal(), -3.0, 3.0) * noise_sigma;
        dst[c] = static_cast<float>(dst[c] + n);
      }
    }
  }
  return grid;
}

struct Bump {
  double x, y, amplitude, sigma;
};

// Height field Z = z0 + g(X, Y) in A's camera frame.
class Surface {
 public:
  Surface(DepthProfile profile, double z0, uint64_t seed) : profile_(profile), z0_(z0) {
    if (profile_ == DepthProfile::kBumps) {
      Rng rng(seed);
      for (int k = 0; k < 6; ++k) {
        Bump b;
        b.x = rng.uniform(-0.45, 0.45) * z0;
        b.y = rng.uniform(-0.45, 0.45) * z0;
        b.amplitude = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.06, 0.12) * z0;
        b.sigma = rng.uniform(0.12, 0.22) * z0;
        bumps_.push_back(b);
      }
    }
  }

  double height(double X, double Y) const {
    switch (profile_) {
      case DepthProfile::kFrontal:
        return z0_;
      case DepthProfile::kSlanted:
        return z0_ + 0.25 * X;
      case DepthProfile::kBumps: {
        double z = z0_;
        for (const Bump& b : bumps_) {
          const double d2 = (X - b.x) * (X - b.x) + (Y - b.y) * (Y - b.y);
          z += b.amplitude * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
        }
        return z;
      }
    }
    return z0_;
  }

  // First intersection of origin + lambda * dir (lambda > 0) with the surface.
  std::optional<Vec3> intersect(const Vec3& origin, const Vec3& dir) const {
    if (dir.z() <= 1e-9) return std::nullopt;
    auto residual = [&](double lambda) {
      const Vec3 p = origin + lambda * dir;
      return p.z() - height(p.x(), p.y());
    };
    if (residual(0.0) >= 0.0) return std::nullopt;
    const double guess = std::max((z0_ - origin.z()) / dir.z(), 1e-6);
    const double step = guess / 32.0;
    double lo = 0.0, hi = 0.0;
    bool bracketed = false;
    for (int k = 1; k <= 256; ++k) {
      hi = k * step;
      if (residual(hi) >= 0.0) {
        bracketed = true;
        break;
      }
      lo = hi;
    }
    if (!bracketed) return std::nullopt;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (residual(mid) < 0.0 ? lo : hi) = mid;
    }
    return origin + 0.5 * (lo + hi) * dir;
  }

 private:
  DepthProfile profile_;
  double z0_;
  std::vector<Bump> bumps_;
};

std::optional<Vec3> cast_pixel(const CameraFrame& frame, const Surface& surface,
                               const Vec2& p) {
  const Vec3 dir_cam = frame.K.inverse() * Vec3(p.x(), p.y(), 1.0);
  const Vec3 dir_world = frame.R.transpose() * dir_cam;
  return surface.intersect(frame.camera_center(), dir_world);
}

Tensor render_depth(const CameraFrame& frame, const Surface& surface, int width,
                    int height) {
  Tensor depth({height, width});
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (const auto X = cast_pixel(frame, surface, Vec2(u + 0.5, v + 0.5))) {
        depth.at(v, u) = static_cast<float>((frame.R * *X + frame.t).z());
      }
    }
  }
  return depth;
}

PairMeta base_meta(uint64_t seed, const SceneConfig& config, double scale_ratio) {
  PairMeta meta;
  meta.seed = seed;
  meta.config = config;
  meta.scale_ratio = scale_ratio;
  meta.bucket = bucket_of(scale_ratio);
  return meta;
}

void validate_config(const SceneConfig& config) {
  if (config.width <= 0 || config.height <= 0 || config.coarse_stride <= 0 ||
      config.fine_stride <= 0 || config.width % config.coarse_stride != 0 ||
      config.height % config.coarse_stride != 0 ||
      config.width % config.fine_stride != 0 || config.height % config.fine_stride != 0) {
    throw std::invalid_argument("SceneConfig: image size must be a multiple of both strides");
  }
  if (config.coarse_channels <= 0 || config.fine_channels <= 0 || config.components <= 0) {
    throw std::invalid_argument("SceneConfig: channel and component counts must be positive");
  }
  if (!(config.coarse_length > 0.0) || !(config.fine_length > 0.0) ||
      !(config.coarse_length_max >= config.coarse_length) ||
      !(config.fine_length_max >= config.fine_length) ||
      !(config.noise_sigma >= 0.0)) {
    throw std::invalid_argument("SceneConfig: lengths must be positive, noise non-negative");
  }
}

void fill_descriptors(ScenePair& pair, uint64_t seed, const FieldCoordinate& coord_a,
                      const FieldCoordinate& coord_b) {
  const SceneConfig& cfg = pair.meta.config;
  const DescriptorField coarse(derive_seed(seed, kCoarseField), cfg.coarse_channels,
                               cfg.components, cfg.coarse_length, cfg.coarse_length_max);
  const DescriptorField fine(derive_seed(seed, kFineField), cfg.fine_channels,
                             cfg.components, cfg.fine_length, cfg.fine_length_max);
  Rng noise(derive_seed(seed, kNoise));
  pair.descA_c = sample_grid(coarse, coord_a, cfg.width, cfg.height, cfg.coarse_stride, 0.0, nullptr);
  pair.descB_c = sample_grid(coarse, coord_b, cfg.width, cfg.height, cfg.coarse_stride,
                             cfg.noise_sigma, &noise);
  pair.descA_f = sample_grid(fine, coord_a, cfg.width, cfg.height, cfg.fine_stride, 0.0, nullptr);
  pair.descB_f = sample_grid(fine, coord_b, cfg.width, cfg.height, cfg.fine_stride,
                             cfg.noise_sigma, &noise);
}

}  // namespace

ScaleBucket bucket_of(double scale_ratio) {
  if (scale_ratio < 2.0) return ScaleBucket::k1to2;
  if (scale_ratio < 3.0) return ScaleBucket::k2to3;
  if (scale_ratio < 4.0) return ScaleBucket::k3to4;
  return ScaleBucket::k4plus;
}

std::string bucket_name(ScaleBucket bucket) {
  switch (bucket) {
    case ScaleBucket::k1to2: return "[1,2)";
    case ScaleBucket::k2to3: return "[2,3)";
    case ScaleBucket::k3to4: return "[3,4)";
    case ScaleBucket::k4plus: return "[4,inf)";
  }
  return "?";
}

std::pair<double, double> bucket_range(ScaleBucket bucket) {
  const double lo = 1.0 + static_cast<int>(bucket);
  return {lo, lo + 1.0};
}

DescriptorField::DescriptorField(uint64_t seed, int channels, int components,
                                 double length, double max_length)
    : channels_(channels),
      components_(components),
      amplitude_(static_cast<float>(std::sqrt(2.0 / components))) {
  Rng rng(seed);
  const size_t n = static_cast<size_t>(channels) * components;
  wx_.resize(n);
  wy_.resize(n);
  phase_.resize(n);
  if (max_length <= 0.0) max_length = length;
  for (size_t k = 0; k < n; ++k) {
    // Lengths are log-spaced across channels.
    const int c = static_cast<int>(k) / components;
    const double t = channels > 1 ? static_cast<double>(c) / (channels - 1) : 0.0;
    const double sigma = 1.0 / (kTwoPi * length * std::pow(max_length / length, t));
    wx_[k] = static_cast<float>(rng.normal() * sigma);
    wy_[k] = static_cast<float>(rng.normal() * sigma);
    phase_[k] = static_cast<float>(rng.uniform() * kTwoPi);
  }
}

void DescriptorField::evaluate(const Vec2& u, float* out) const {
  for (int c = 0; c < channels_; ++c) {
    double acc = 0.0;
    const size_t base = static_cast<size_t>(c) * components_;
    for (int k = 0; k < components_; ++k) {
      acc += std::cos(kTwoPi * (wx_[base + k] * u.x() + wy_[base + k] * u.y()) +
                      phase_[base + k]);
    }
    out[c] = static_cast<float>(amplitude_ * acc);
  }
}

ScenePair make_homography_pair(uint64_t seed, const Homography& H,
                               const SceneConfig& config) {
  validate_config(config);
  ScenePair pair;
  pair.geometry = PairGeometry::planar(H, config.width, config.height);
  // Linear scale from the Jacobian at the image center.
  const Vec2 c(0.5 * config.width, 0.5 * config.height);
  const double eps = 1e-3;
  const Vec2 dx = (H.apply(c + Vec2(eps, 0)) - H.apply(c - Vec2(eps, 0))) / (2 * eps);
  const Vec2 dy = (H.apply(c + Vec2(0, eps)) - H.apply(c - Vec2(0, eps))) / (2 * eps);
  const double det = std::abs(dx.x() * dy.y() - dx.y() * dy.x());
  const double linear = std::sqrt(det);
  pair.meta = base_meta(seed, config, std::max(linear, 1.0 / linear));
  pair.meta.mode = "planar";

  const Homography Hinv = H.inverse();
  const FieldCoordinate coord_a = [](const Vec2& p) -> std::optional<Vec2> { return p; };
  const FieldCoordinate coord_b = [Hinv](const Vec2& q) -> std::optional<Vec2> {
    const Vec3 r = Hinv.matrix() * Vec3(q.x(), q.y(), 1.0);
    if (r.z() <= 1e-12) return std::nullopt;
    return Vec2(r.head<2>() / r.z());
  };
  fill_descriptors(pair, seed, coord_a, coord_b);
  pair.gt = generate_labels(pair.geometry, config.coarse_stride);
  return pair;
}

ScenePair make_planar_pair(uint64_t seed, const PlanarParams& params) {
  if (!(params.scale_ratio >= 1.0)) {
    throw std::invalid_argument("make_planar_pair: scale_ratio must be >= 1");
  }
  const SceneConfig& cfg = params.config;
  const double cx = 0.5 * cfg.width, cy = 0.5 * cfg.height;
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double k = 1.0 / params.scale_ratio;
  Mat3 to_origin = Mat3::Identity(), back = Mat3::Identity(), rs = Mat3::Identity();
  to_origin(0, 2) = -cx;
  to_origin(1, 2) = -cy;
  back(0, 2) = cx + params.translation.x();
  back(1, 2) = cy + params.translation.y();
  rs << k * std::cos(theta), -k * std::sin(theta), 0.0, k * std::sin(theta),
      k * std::cos(theta), 0.0, 0.0, 0.0, 1.0;
  ScenePair pair = make_homography_pair(seed, Homography(back * rs * to_origin), cfg);
  pair.meta.scale_ratio = params.scale_ratio;
  pair.meta.bucket = bucket_of(params.scale_ratio);
  pair.meta.rotation_deg = params.rotation_deg;
  return pair;
}

ScenePair make_planar_pair(uint64_t seed, double scale_ratio, double rotation_deg,
                           double noise_sigma) {
  PlanarParams params;
  params.scale_ratio = scale_ratio;
  params.rotation_deg = rotation_deg;
  params.config.noise_sigma = noise_sigma;
  return make_planar_pair(seed, params);
}

std::string depth_profile_name(DepthProfile profile) {
  switch (profile) {
    case DepthProfile::kFrontal: return "frontal";
    case DepthProfile::kSlanted: return "slanted";
    case DepthProfile::kBumps: return "bumps";
  }
  return "?";
}

DepthProfile parse_depth_profile(const std::string& name) {
  if (name == "frontal") return DepthProfile::kFrontal;
  if (name == "slanted") return DepthProfile::kSlanted;
  if (name == "bumps") return DepthProfile::kBumps;
  throw std::invalid_argument("unknown depth profile: " + name);
}

ScenePair make_3d_pair(uint64_t seed, const StereoParams& params) {
  const SceneConfig& cfg = params.config;
  validate_config(cfg);
  PoseOffset pose = params.pose;
  if (params.scale_bucket) {
    const auto [lo, hi] = bucket_range(*params.scale_bucket);
    Rng rng(derive_seed(seed, kBucket));
    pose.zoom = rng.uniform(lo, hi);
  }
  if (!(pose.zoom >= 1.0)) throw std::invalid_argument("make_3d_pair: zoom must be >= 1");
  if (!(params.reference_depth > 0.0)) {
    throw std::invalid_argument("make_3d_pair: reference depth must be positive");
  }

  const double z0 = params.reference_depth;
  const double f = params.focal > 0.0 ? params.focal : static_cast<double>(cfg.width);
  Mat3 K;
  K << f, 0.0, 0.5 * cfg.width, 0.0, f, 0.5 * cfg.height, 0.0, 0.0, 1.0;

  const Surface surface(params.profile, z0, derive_seed(seed, kSurface));

  CameraFrame a;
  a.K = K;
  CameraFrame b;
  b.K = K;
  b.R = rotation_from_euler_deg(pose.yaw_deg, pose.pitch_deg, pose.roll_deg);
  const double cz = pose.toward ? z0 * (1.0 - 1.0 / pose.zoom) : -z0 * (pose.zoom - 1.0);
  const Vec3 center(pose.baseline_x * z0, pose.baseline_y * z0, cz);
  b.t = -b.R * center;
  a.depth = render_depth(a, surface, cfg.width, cfg.height);
  b.depth = render_depth(b, surface, cfg.width, cfg.height);

  ScenePair pair;
  pair.geometry = PairGeometry::stereo(a, b);
  const double zb = (b.R * Vec3(0.0, 0.0, surface.height(0.0, 0.0)) + b.t).z();
  const double za = surface.height(0.0, 0.0);
  const double ratio = zb / za;
  pair.meta = base_meta(seed, cfg, std::max(ratio, 1.0 / ratio));
  pair.meta.mode = "stereo";
  pair.meta.rotation_deg = pose.yaw_deg;
  pair.meta.depth_profile = depth_profile_name(params.profile);
  pair.meta.zoom = pose.zoom;

  // Field coordinates: projection of the surface point onto A's image plane
  // at the reference depth, so frontal scenes reproduce the planar field.
  const double cx = 0.5 * cfg.width, cy = 0.5 * cfg.height;
  auto coordinate_for = [&surface, f, z0, cx, cy](const CameraFrame& frame) {
    return FieldCoordinate([&surface, frame, f, z0, cx, cy](const Vec2& p) -> std::optional<Vec2> {
      const auto X = cast_pixel(frame, surface, p);
      if (!X) return std::nullopt;
      return Vec2(f * X->x() / z0 + cx, f * X->y() / z0 + cy);
    });
  };
  fill_descriptors(pair, seed, coordinate_for(pair.geometry.frameA),
                   coordinate_for(pair.geometry.frameB));
  pair.gt = generate_labels(pair.geometry, cfg.coarse_stride);
  return pair;
}

}  // namespace adamatch
