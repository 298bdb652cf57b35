#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adamatch/assignment.hpp"
#include "adamatch/cfi.hpp"
#include "adamatch/covisible.hpp"
#include "adamatch/io.hpp"
#include "adamatch/losses.hpp"
#include "adamatch/refine.hpp"
#include "adamatch/synthscene.hpp"

namespace adamatch {

struct RunConfig {
  std::string dataset;
  std::string weights;  // empty: seeded init
  std::string out_dir;
  std::optional<uint64_t> seed;

  double theta_m = kDefaultMatchThreshold;
  double theta_cov = kDefaultCovisibleThreshold;
  double r = kDefaultTemperature;
  double refine_temperature = 0.0;  // <= 0: scale-dependent default
  std::string attention = "linear";
  bool permissive = false;          // keep every entry above theta_m
  bool covisible_filter = true;
  bool refine = true;
  bool group_attention = true;

  int ransac_iterations = 2000;
  double ransac_px = 3.0;
  double ransac_epipolar = 1e-3;
  uint64_t ransac_seed = 0;
  int match_cap = 1024;  // matches per pair fed to MMA
  int workers = 1;

  LossConfig loss;

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
  std::string to_json() const;
  // Unknown keys are rejected; missing keys keep their defaults.
  static RunConfig from_json(const std::string& text);
};

// Seeded weights when cfg.weights is empty (seed required), else loaded.
ModelWeights load_or_init_weights(const RunConfig& cfg);

struct LossReport {
  double cov = 0.0, match = 0.0, refine = 0.0, total = 0.0;
  bool refine_empty = false;
};

struct PairRun {
  CoVisibleMap cov;
  DualSoftmax assignment;
  ScaleEstimate scale;
  MatchSet selected;  // M_index
  MatchSet filtered;  // after the co-visibility filter
  RefineResult refined;
  LossReport losses;
};

PairRun match_pair(const ScenePair& pair, const ModelWeights& weights, const RunConfig& cfg);

// Turns unrefined patch matches into full-resolution center matches.
std::vector<RefinedMatch> patch_center_matches(const MatchSet& matches, int cols, int stride);

std::string loss_report_json(const LossReport& report);

struct PairEval {
  std::string name;
  std::string mode;
  std::string bucket;
  double scale_ratio = 1.0;
  int matches = 0;
  // Planar.
  double corner_error = 0.0;
  std::vector<bool> corner_pass;  // @1, @3, @5 px
  // Both.
  std::vector<double> mma;  // @1, @2, @3 px
  // Stereo.
  double rotation_error = 0.0, translation_error = 0.0, pose_error = 0.0;
  double precision = 0.0;  // epipolar error < 1e-4
  bool failed = false;     // estimator could not produce a model
};

PairEval evaluate_pair(const std::string& name, const ScenePair& pair,
                       const std::vector<CsvMatch>& matches, const RunConfig& cfg);

struct EvalReport {
  std::vector<PairEval> pairs;
};

std::string report_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);
// Cumulative error curve (fraction of pairs with error <= x), or empty when
// no pair carries that kind of error.
std::string error_curve_svg(const std::vector<double>& errors, double max_x,
                            const std::string& x_label);

// Calls fn(k) for k in [0, n) on up to `workers` threads.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace adamatch
