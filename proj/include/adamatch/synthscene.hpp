#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adamatch/features.hpp"
#include "adamatch/labels.hpp"
#include "adamatch/pair_geometry.hpp"
#include "adamatch/rng.hpp"

namespace adamatch {

// Scale-ratio buckets [1,2), [2,3), [3,4), [4,inf).
enum class ScaleBucket { k1to2 = 0, k2to3 = 1, k3to4 = 2, k4plus = 3 };

ScaleBucket bucket_of(double scale_ratio);
std::string bucket_name(ScaleBucket bucket);
// Sampling range used when generating a pair for a bucket; [4,inf) samples
// from [4,5).
std::pair<double, double> bucket_range(ScaleBucket bucket);

// Band-limited random vector field: every channel is a normalized sum of
// random sinusoids whose frequencies are Gaussian, so the expected
// autocorrelation of channel c is exp(-d^2 / (2 * l_c^2)) with unit variance.
// l_c runs log-spaced from `length` to `max_length` (<= 0: single length).
class DescriptorField {
 public:
  DescriptorField(uint64_t seed, int channels, int components, double length,
                  double max_length = 0.0);

  int channels() const { return channels_; }
  void evaluate(const Vec2& u, float* out) const;

 private:
  int channels_;
  int components_;
  float amplitude_;
  std::vector<float> wx_, wy_, phase_;  // channels * components
};

struct SceneConfig {
  int width = 64;
  int height = 64;
  int coarse_stride = 8;
  int fine_stride = 2;
  int coarse_channels = 256;
  int fine_channels = 128;
  int components = 16;
  // Correlation length ranges, px in A's image plane.
  double coarse_length = 4.0;
  double coarse_length_max = 32.0;
  double fine_length = 3.0;
  double fine_length_max = 12.0;
  double noise_sigma = 0.0;    // added to B, clipped at 3 sigma
};

struct PairMeta {
  uint64_t seed = 0;
  std::string mode;             // "planar" | "stereo"
  double scale_ratio = 1.0;     // >= 1
  ScaleBucket bucket = ScaleBucket::k1to2;
  double rotation_deg = 0.0;
  std::string generator = Rng::kName;
  SceneConfig config;
  // Stereo extras, recorded for reproducibility.
  std::string depth_profile;
  double zoom = 1.0;
};

struct ScenePair {
  PairGeometry geometry;
  FeatureGrid descA_c, descB_c;  // 1/8
  FeatureGrid descA_f, descB_f;  // 1/2
  GroundTruthLabels gt;
  PairMeta meta;
};

struct PlanarParams {
  double scale_ratio = 1.0;       // B is a zoomed-out view of A by this factor
  double rotation_deg = 0.0;      // about the image center
  Vec2 translation = Vec2::Zero();  // px in B, applied after zoom/rotation
  SceneConfig config;
};

// Throws std::invalid_argument when scale_ratio < 1.
ScenePair make_planar_pair(uint64_t seed, const PlanarParams& params);
ScenePair make_planar_pair(uint64_t seed, double scale_ratio, double rotation_deg,
                           double noise_sigma);

// Planar pair for an arbitrary homography A -> B.
ScenePair make_homography_pair(uint64_t seed, const Homography& H,
                               const SceneConfig& config);

enum class DepthProfile { kFrontal, kSlanted, kBumps };
std::string depth_profile_name(DepthProfile profile);
DepthProfile parse_depth_profile(const std::string& name);

struct PoseOffset {
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
  double roll_deg = 0.0;
  // Lateral camera shift of B, in units of the reference depth.
  double baseline_x = 0.0;
  double baseline_y = 0.0;
  // Depth ratio between the views; B moves away from the scene (zoomed out)
  // unless `toward` is set.
  double zoom = 1.0;
  bool toward = false;
};

struct StereoParams {
  PoseOffset pose;
  DepthProfile profile = DepthProfile::kFrontal;
  std::optional<ScaleBucket> scale_bucket;  // overrides pose.zoom when set
  double reference_depth = 4.0;
  double focal = 0.0;  // 0 -> image width
  SceneConfig config;
};

ScenePair make_3d_pair(uint64_t seed, const StereoParams& params);

}  // namespace adamatch
