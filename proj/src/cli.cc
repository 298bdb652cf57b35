#include "adamatch/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "adamatch/errors.hpp"
#include "adamatch/pipeline.hpp"
#include "adamatch/selftest.hpp"

namespace adamatch {

using nlohmann::json;

namespace {

// Raised for bad flag combinations detected after parsing.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PairFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int report_error(const char* kind, int code, const std::string& message) {
  std::string msg;
  for (char c : message) {
    if (c == '\n') msg += "\\n";
    else if (c == '"') msg += "\\\"";
    else msg += c;
  }
  std::fprintf(stderr, "adamatch: error kind=%s exit=%d message=\"%s\"\n", kind, code, msg.c_str());
  return code;
}

std::string resolve_out(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  return from_config;
}

std::vector<ScaleBucket> parse_buckets(const std::string& text) {
  std::vector<ScaleBucket> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "1") out.push_back(ScaleBucket::k1to2);
    else if (item == "2") out.push_back(ScaleBucket::k2to3);
    else if (item == "3") out.push_back(ScaleBucket::k3to4);
    else if (item == "4") out.push_back(ScaleBucket::k4plus);
    else throw ConfigError("bucket list takes lower bounds among 1,2,3,4; got '" + item + "'");
  }
  if (out.empty()) throw ConfigError("bucket list is empty");
  return out;
}

struct GenOptions {
  std::string out;
  int count = 4;
  uint64_t seed = 0;
  std::string mode = "planar";
  std::string buckets = "1,2,3,4";
  double noise = 0.05;
  double rotation = 10.0;
  int size = 64;
};

ScenePair generate_one(const GenOptions& o, int k, ScaleBucket bucket, bool stereo) {
  const uint64_t seed = derive_seed(o.seed, 1000 + static_cast<uint64_t>(k));
  Rng rng(derive_seed(seed, 7));
  SceneConfig cfg;
  cfg.width = cfg.height = o.size;
  cfg.noise_sigma = o.noise;
  if (!stereo) {
    const auto [lo, hi] = bucket_range(bucket);
    PlanarParams p;
    p.scale_ratio = rng.uniform(lo, hi);
    p.rotation_deg = rng.uniform(-o.rotation, o.rotation);
    p.config = cfg;
    return make_planar_pair(seed, p);
  }
  StereoParams p;
  p.config = cfg;
  p.profile = DepthProfile::kBumps;
  p.scale_bucket = bucket;
  p.pose.yaw_deg = rng.uniform(-o.rotation, o.rotation) * 0.5;
  p.pose.pitch_deg = rng.uniform(-o.rotation, o.rotation) * 0.25;
  p.pose.baseline_x = rng.uniform(-0.15, 0.15);
  p.pose.baseline_y = rng.uniform(-0.05, 0.05);
  return make_3d_pair(seed, p);
}

int cmd_gen(const GenOptions& o) {
  const std::string out = resolve_out(o.out, "");
  if (out.empty()) throw ConfigError("gen: no output directory (--out or " + std::string(kOutDirEnv) + ")");
  if (o.count < 0) throw ConfigError("gen: --count must be >= 0");
  if (o.mode != "planar" && o.mode != "stereo" && o.mode != "mixed") {
    throw ConfigError("gen: --mode must be planar, stereo or mixed");
  }
  const auto buckets = parse_buckets(o.buckets);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out + ": " + ec.message());
  for (int k = 0; k < o.count; ++k) {
    const bool stereo = o.mode == "stereo" || (o.mode == "mixed" && k % 2 == 1);
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%04d", k);
    save_pair(fs::path(out) / name, generate_one(o, k, buckets[k % buckets.size()], stereo));
  }
  std::printf("generated %d pairs in %s\n", o.count, out.c_str());
  return kExitOk;
}

int cmd_match(RunConfig cfg, bool export_masks) {
  cfg.out_dir = resolve_out(cfg.out_dir, cfg.out_dir);
  if (cfg.dataset.empty()) throw ConfigError("match: --dataset is required");
  if (cfg.out_dir.empty()) throw ConfigError("match: no output directory");
  if (cfg.weights.empty() && !cfg.seed) throw ConfigError("match: provide --weights or --seed");
  cfg.validate();
  const ModelWeights weights = load_or_init_weights(cfg);
  const auto pairs = list_pairs(cfg.dataset);

  std::vector<json> records(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), cfg.workers, [&](int k) {
    const std::string name = pairs[k].filename().string();
    json rec = {{"pair", name}};
    try {
      const ScenePair pair = load_pair(pairs[k]);
      const PairRun run = match_pair(pair, weights, cfg);
      const fs::path dir = fs::path(cfg.out_dir) / name;
      write_file_atomic(dir / "matches.csv", matches_to_csv(run.refined.matches));
      write_file_atomic(dir / "loss.json", loss_report_json(run.losses));
      if (export_masks) {
        write_file_atomic(dir / "covisA.pgm", mask_to_pgm(run.cov.maskA, run.cov.rows, run.cov.cols));
        write_file_atomic(dir / "covisB.pgm", mask_to_pgm(run.cov.maskB, run.cov.rows, run.cov.cols));
      }
      rec["status"] = "ok";
      rec["s0"] = run.scale.s0;
      rec["s1"] = run.scale.s1;
      rec["index"] = run.scale.index;
      rec["proposals"] = run.selected.size();
      rec["after_filter"] = run.filtered.size();
      rec["refined"] = run.refined.matches.size();
      rec["discarded"] = run.refined.stats.discarded;
    } catch (const std::exception& e) {
      rec["status"] = "error";
      rec["error"] = e.what();
    }
    records[k] = rec;
  });
  int failures = 0;
  for (const json& r : records) failures += r.at("status") == "error" ? 1 : 0;
  json summary = {{"pairs", records}, {"failures", failures}};
  write_file_atomic(fs::path(cfg.out_dir) / "summary.json", summary.dump(1) + "\n");
  std::printf("matched %zu pairs, %d failed\n", pairs.size(), failures);
  if (failures > 0) throw PairFailure(std::to_string(failures) + " pair(s) failed; see summary.json");
  return kExitOk;
}

struct ExternalOptions {
  std::string scores, fine_a, fine_b, out;
  double theta = 0.2;
  int coarse_stride = 8;
};

int cmd_refine_external(const ExternalOptions& o, RunConfig cfg) {
  if (o.scores.empty() || o.fine_a.empty() || o.fine_b.empty()) {
    throw ConfigError("refine-external: --scores, --fine-a and --fine-b are required");
  }
  const std::string out = o.out.empty() ? resolve_out("", "") : o.out;
  if (out.empty()) throw ConfigError("refine-external: no output path");
  if (cfg.weights.empty() && !cfg.seed) throw ConfigError("refine-external: provide --weights or --seed");
  cfg.validate();
  const fs::path out_path = o.out.empty() ? fs::path(out) / "refined.csv" : fs::path(out);

  const TensorMap scores_file = read_tensors(o.scores);
  const auto it = scores_file.find("scores");
  if (it == scores_file.end() || it->second.rank() != 2) {
    throw FormatError(o.scores + ": expected a 2-D 'scores' entry");
  }
  const FeatureGrid fa = grid_from_tensors(read_tensors(o.fine_a));
  const FeatureGrid fb = grid_from_tensors(read_tensors(o.fine_b));
  auto cells = [&](const FeatureGrid& g) {
    return static_cast<int64_t>(g.rows() * g.stride / o.coarse_stride) * (g.cols() * g.stride / o.coarse_stride);
  };
  if (it->second.dim(0) != cells(fa) || it->second.dim(1) != cells(fb)) {
    throw FormatError("scores are " + it->second.shape_string() + " but fine grids imply " +
                      std::to_string(cells(fa)) + " x " + std::to_string(cells(fb)) + " patches");
  }
  if (fa.map.shape() != fb.map.shape()) throw FormatError("fine grids differ in shape");

  ModelWeights weights = load_or_init_weights(cfg);
  if (weights.dims.fine_dim != fa.channels()) {
    throw FormatError("fine features have " + std::to_string(fa.channels()) + " channels, weights expect " +
                      std::to_string(weights.dims.fine_dim));
  }
  const ExternalProposals props = proposals_from_external(it->second, o.theta);
  const ScaleEstimate scale = estimate_scale(props.rows, props.columns);
  MatchSet proposals = props.merged;
  proposals.direction = scale.index;
  RefineConfig rc;
  rc.temperature = cfg.refine_temperature;
  rc.group_attention = cfg.group_attention;
  const RefineResult r = refine_matches(proposals, fa, fb, scale, weights, rc, o.coarse_stride);
  write_file_atomic(out_path, matches_to_csv(r.matches));
  std::printf("refined %zu of %d proposals (%d discarded at borders)\n", r.matches.size(),
              r.stats.proposals, r.stats.discarded);
  return kExitOk;
}

int cmd_eval(RunConfig cfg, const std::string& matches_dir) {
  cfg.out_dir = resolve_out(cfg.out_dir, cfg.out_dir);
  if (cfg.dataset.empty() || matches_dir.empty()) throw ConfigError("eval: --dataset and --matches are required");
  if (cfg.out_dir.empty()) throw ConfigError("eval: no output directory");
  cfg.validate();
  const auto pairs = list_pairs(cfg.dataset);
  EvalReport report;
  report.pairs.resize(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), cfg.workers, [&](int k) {
    const std::string name = pairs[k].filename().string();
    const ScenePair pair = load_pair(pairs[k]);
    const fs::path csv = fs::path(matches_dir) / name / "matches.csv";
    report.pairs[k] = evaluate_pair(name, pair, matches_from_csv(read_file(csv)), cfg);
  });
  const fs::path out(cfg.out_dir);
  write_file_atomic(out / "report.json", report_json(report));
  write_file_atomic(out / "report.csv", report_csv(report));
  std::vector<double> corner, pose;
  for (const PairEval& ev : report.pairs) {
    if (ev.mode == "planar") corner.push_back(ev.corner_error);
    else pose.push_back(ev.pose_error);
  }
  if (!corner.empty()) write_file_atomic(out / "corner_error.svg", error_curve_svg(corner, 10.0, "mean corner error (px)"));
  if (!pose.empty()) write_file_atomic(out / "pose_error.svg", error_curve_svg(pose, 20.0, "pose error (deg)"));
  std::printf("evaluated %zu pairs\n", pairs.size());
  return kExitOk;
}

int cmd_selftest(const std::string& out) {
  const auto results = run_selftest();
  int failed = 0;
  json rows = json::array();
  for (const SelftestResult& r : results) {
    std::printf("%-32s %s  %s\n", r.name.c_str(), r.ok ? "ok" : "FAIL", r.detail.c_str());
    failed += r.ok ? 0 : 1;
    rows.push_back({{"name", r.name}, {"ok", r.ok}, {"detail", r.detail}});
  }
  std::printf("%zu checks, %d failed\n", results.size(), failed);
  if (!out.empty()) write_file_atomic(fs::path(out) / "selftest.json", rows.dump(1) + "\n");
  return failed == 0 ? kExitOk : kExitSelftest;
}

void add_run_flags(CLI::App* sub, RunConfig& cfg, std::optional<uint64_t>& seed) {
  sub->add_option("--weights", cfg.weights, "weight container; default is seeded init");
  sub->add_option("--seed", seed, "seed for weight init");
  sub->add_option("--theta-m", cfg.theta_m, "match threshold");
  sub->add_option("--theta-cov", cfg.theta_cov, "co-visibility threshold");
  sub->add_option("--r", cfg.r, "similarity temperature");
  sub->add_option("--refine-temperature", cfg.refine_temperature, "heatmap temperature (0: min(2 s, sqrt(c)))");
  sub->add_option("--attention", cfg.attention, "softmax or linear");
  sub->add_option("--workers", cfg.workers, "worker threads");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Adaptive patch matching on synthetic scenes"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "generate a synthetic dataset");
  g->add_option("--out", gen.out, "dataset directory");
  g->add_option("--count", gen.count, "number of pairs");
  g->add_option("--seed", gen.seed, "dataset seed");
  g->add_option("--mode", gen.mode, "planar, stereo or mixed");
  g->add_option("--buckets", gen.buckets, "scale buckets by lower bound, e.g. 1,2,3,4");
  g->add_option("--noise", gen.noise, "descriptor noise sigma");
  g->add_option("--rotation", gen.rotation, "max in-plane rotation, degrees");
  g->add_option("--size", gen.size, "image side in pixels");

  RunConfig mcfg;
  std::optional<uint64_t> mseed;
  std::string config_file;
  bool print_config = false, no_refine = false, no_filter = false, permissive = false, export_masks = false;
  auto* m = app.add_subcommand("match", "run the matcher over a dataset");
  m->add_option("--dataset", mcfg.dataset, "dataset directory");
  m->add_option("--out", mcfg.out_dir, "output directory");
  m->add_option("--config", config_file, "JSON config; flags override it");
  m->add_flag("--print-config", print_config, "print the effective config and exit");
  m->add_flag("--no-refine", no_refine, "skip sub-pixel refinement");
  m->add_flag("--no-covisible-filter", no_filter, "keep matches outside predicted co-visible areas");
  m->add_flag("--permissive", permissive, "keep every entry above theta-m");
  m->add_flag("--export-masks", export_masks, "write co-visibility masks as PGM");
  add_run_flags(m, mcfg, mseed);

  ExternalOptions ext;
  RunConfig ecfg;
  std::optional<uint64_t> eseed;
  auto* x = app.add_subcommand("refine-external", "refine proposals from an external score matrix");
  x->add_option("--scores", ext.scores, "tensor file with 'scores' (N_A x N_B)");
  x->add_option("--fine-a", ext.fine_a, "fine feature file of image A");
  x->add_option("--fine-b", ext.fine_b, "fine feature file of image B");
  x->add_option("--theta", ext.theta, "score threshold");
  x->add_option("--coarse-stride", ext.coarse_stride, "patch size in pixels");
  x->add_option("--out", ext.out, "output CSV");
  add_run_flags(x, ecfg, eseed);

  RunConfig vcfg;
  std::string matches_dir;
  auto* v = app.add_subcommand("eval", "evaluate match files against ground truth");
  v->add_option("--dataset", vcfg.dataset, "dataset directory");
  v->add_option("--matches", matches_dir, "directory written by match");
  v->add_option("--out", vcfg.out_dir, "report directory");
  v->add_option("--ransac-iterations", vcfg.ransac_iterations, "RANSAC iterations");
  v->add_option("--ransac-px", vcfg.ransac_px, "homography inlier threshold, px");
  v->add_option("--ransac-epipolar", vcfg.ransac_epipolar, "essential inlier threshold");
  v->add_option("--ransac-seed", vcfg.ransac_seed, "RANSAC seed");
  v->add_option("--workers", vcfg.workers, "worker threads");

  std::string selftest_out;
  auto* s = app.add_subcommand("selftest", "run invariant checks on built-in fixtures");
  s->add_option("--out", selftest_out, "also write selftest.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", kExitUsage, e.what());
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*m) {
      RunConfig cfg;
      if (!config_file.empty()) {
        const std::string text = read_file(config_file);
        try {
          cfg = RunConfig::from_json(text);
        } catch (const FormatError& e) {
          throw ConfigError(config_file + ": " + e.what());
        }
      }
      // Explicit flags win over the file.
      for (const CLI::Option* opt : m->get_options()) {
        if (opt->count() == 0) continue;
        const std::string name = opt->get_name();
        if (name == "--dataset") cfg.dataset = mcfg.dataset;
        else if (name == "--out") cfg.out_dir = mcfg.out_dir;
        else if (name == "--weights") cfg.weights = mcfg.weights;
        else if (name == "--seed") cfg.seed = mseed;
        else if (name == "--theta-m") cfg.theta_m = mcfg.theta_m;
        else if (name == "--theta-cov") cfg.theta_cov = mcfg.theta_cov;
        else if (name == "--r") cfg.r = mcfg.r;
        else if (name == "--refine-temperature") cfg.refine_temperature = mcfg.refine_temperature;
        else if (name == "--attention") cfg.attention = mcfg.attention;
        else if (name == "--workers") cfg.workers = mcfg.workers;
      }
      if (no_refine) cfg.refine = false;
      if (no_filter) cfg.covisible_filter = false;
      if (permissive) cfg.permissive = true;
      if (print_config) {
        cfg.validate();
        std::fputs(cfg.to_json().c_str(), stdout);
        return kExitOk;
      }
      return cmd_match(cfg, export_masks);
    }
    if (*x) {
      ecfg.seed = eseed;
      return cmd_refine_external(ext, ecfg);
    }
    if (*v) return cmd_eval(vcfg, matches_dir);
    if (*s) return cmd_selftest(selftest_out);
  } catch (const ConfigError& e) {
    return report_error("config", kExitConfig, e.what());
  } catch (const std::invalid_argument& e) {
    return report_error("config", kExitConfig, e.what());
  } catch (const IoError& e) {
    return report_error("io", kExitIo, e.what());
  } catch (const FormatError& e) {
    return report_error("format", kExitFormat, e.what());
  } catch (const PairFailure& e) {
    return report_error("pair", kExitPairFailure, e.what());
  } catch (const fs::filesystem_error& e) {
    return report_error("io", kExitIo, e.what());
  } catch (const std::exception& e) {
    return report_error("internal", kExitInternal, e.what());
  }
  return kExitUsage;
}

}  // namespace adamatch
