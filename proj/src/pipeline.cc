#include "adamatch/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "adamatch/errors.hpp"
#include "adamatch/metrics.hpp"

namespace adamatch {

using nlohmann::json;

namespace {

constexpr uint64_t kSupervisionStream = 11;


std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

void RunConfig::validate() const {
  if (!(theta_m >= 0.0 && theta_m <= 1.0)) throw std::invalid_argument("theta_m must lie in [0, 1]");
  if (!(theta_cov >= 0.0 && theta_cov <= 1.0)) throw std::invalid_argument("theta_cov must lie in [0, 1]");
  if (!(r > 0.0)) throw std::invalid_argument("r must be positive");
  if (!(refine_temperature >= 0.0)) throw std::invalid_argument("refine_temperature must be >= 0");
  parse_attention_kind(attention);
  if (ransac_iterations <= 0) throw std::invalid_argument("ransac_iterations must be positive");
  if (!(ransac_px > 0.0) || !(ransac_epipolar > 0.0)) {
    throw std::invalid_argument("RANSAC thresholds must be positive");
  }
  if (match_cap <= 0) throw std::invalid_argument("match_cap must be positive");
  if (workers <= 0) throw std::invalid_argument("workers must be positive");
  loss.validate();
}

std::string RunConfig::to_json() const {
  json j = {{"dataset", dataset},
            {"weights", weights},
            {"out_dir", out_dir},
            {"seed", seed ? json(*seed) : json(nullptr)},
            {"theta_m", theta_m},
            {"theta_cov", theta_cov},
            {"r", r},
            {"refine_temperature", refine_temperature},
            {"attention", attention},
            {"permissive", permissive},
            {"covisible_filter", covisible_filter},
            {"refine", refine},
            {"group_attention", group_attention},
            {"ransac_iterations", ransac_iterations},
            {"ransac_px", ransac_px},
            {"ransac_epipolar", ransac_epipolar},
            {"ransac_seed", ransac_seed},
            {"match_cap", match_cap},
            {"workers", workers},
            {"loss_alpha", loss.alpha},
            {"loss_gamma", loss.gamma},
            {"loss_w_cov", loss.w_cov},
            {"loss_w_match", loss.w_match},
            {"loss_w_refine", loss.w_refine},
            {"loss_sample_fraction", loss.sample_fraction},
            {"loss_sample_cap", loss.sample_cap},
            {"loss_match_both_directions", loss.match_both_directions}};
  return j.dump(1) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config: expected a JSON object");
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "dataset") c.dataset = v.get<std::string>();
      else if (key == "weights") c.weights = v.get<std::string>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else if (key == "seed") c.seed = v.is_null() ? std::nullopt : std::optional<uint64_t>(v.get<uint64_t>());
      else if (key == "theta_m") c.theta_m = v.get<double>();
      else if (key == "theta_cov") c.theta_cov = v.get<double>();
      else if (key == "r") c.r = v.get<double>();
      else if (key == "refine_temperature") c.refine_temperature = v.get<double>();
      else if (key == "attention") c.attention = v.get<std::string>();
      else if (key == "permissive") c.permissive = v.get<bool>();
      else if (key == "covisible_filter") c.covisible_filter = v.get<bool>();
      else if (key == "refine") c.refine = v.get<bool>();
      else if (key == "group_attention") c.group_attention = v.get<bool>();
      else if (key == "ransac_iterations") c.ransac_iterations = v.get<int>();
      else if (key == "ransac_px") c.ransac_px = v.get<double>();
      else if (key == "ransac_epipolar") c.ransac_epipolar = v.get<double>();
      else if (key == "ransac_seed") c.ransac_seed = v.get<uint64_t>();
      else if (key == "match_cap") c.match_cap = v.get<int>();
      else if (key == "workers") c.workers = v.get<int>();
      else if (key == "loss_alpha") c.loss.alpha = v.get<double>();
      else if (key == "loss_gamma") c.loss.gamma = v.get<double>();
      else if (key == "loss_w_cov") c.loss.w_cov = v.get<double>();
      else if (key == "loss_w_match") c.loss.w_match = v.get<double>();
      else if (key == "loss_w_refine") c.loss.w_refine = v.get<double>();
      else if (key == "loss_sample_fraction") c.loss.sample_fraction = v.get<double>();
      else if (key == "loss_sample_cap") c.loss.sample_cap = v.get<int>();
      else if (key == "loss_match_both_directions") c.loss.match_both_directions = v.get<bool>();
      else throw FormatError("config: unknown key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

ModelWeights load_or_init_weights(const RunConfig& cfg) {
  if (!cfg.weights.empty()) return weights_from_tensors(read_tensors(cfg.weights));
  if (!cfg.seed) throw std::invalid_argument("either a weights file or a seed is required");
  ModelDims dims;
  dims.attention = parse_attention_kind(cfg.attention);
  return init_weights(*cfg.seed, dims);
}

std::vector<RefinedMatch> patch_center_matches(const MatchSet& matches, int cols, int stride) {
  std::vector<RefinedMatch> out;
  for (const PatchMatch& m : matches.pairs) {
    RefinedMatch rm;
    rm.i = m.i;
    rm.j = m.j;
    rm.direction = matches.direction;
    rm.confidence = m.confidence;
    rm.pA = {stride * (m.i % cols) + 0.5 * stride, stride * (m.i / cols) + 0.5 * stride};
    rm.pB = {stride * (m.j % cols) + 0.5 * stride, stride * (m.j / cols) + 0.5 * stride};
    out.push_back(rm);
  }
  return out;
}

PairRun match_pair(const ScenePair& pair, const ModelWeights& weights, const RunConfig& cfg) {
  PairRun run;
  const CfiOutput cfi = cfi_forward(pair.descA_c, pair.descB_c, weights);

  run.cov = make_covisible_map(covisible_head(cfi.featA2, cfi.queryA, weights),
                               covisible_head(cfi.featB2, cfi.queryB, weights), cfg.theta_cov);

  // Features are scaled by 1/sqrt(d) on each side before the inner product.
  const float norm = 1.0f / std::sqrt(static_cast<float>(weights.dims.d_model));
  const FeatureGrid a(scale(cfi.featA3.map, norm), cfi.featA3.stride);
  const FeatureGrid b(scale(cfi.featB3.map, norm), cfi.featB3.stride);
  run.assignment = dual_softmax_proposals(similarity(a, b, cfg.r), cfg.theta_m,
                                          cfg.permissive ? SelectionMode::kPermissive
                                                         : SelectionMode::kArgmax);
  run.scale = estimate_scale(run.assignment.M0, run.assignment.M1);
  run.selected = run.scale.index == 0 ? run.assignment.M0 : run.assignment.M1;
  run.filtered = cfg.covisible_filter ? filter_covisible(run.selected, run.cov) : run.selected;

  const int stride = pair.descA_c.stride;
  if (cfg.refine) {
    RefineConfig rc;
    rc.temperature = cfg.refine_temperature;
    rc.group_attention = cfg.group_attention;
    run.refined = refine_matches(run.filtered, pair.descA_f, pair.descB_f, run.scale, weights, rc, stride);
  } else {
    run.refined.matches = patch_center_matches(run.filtered, pair.descA_c.cols(), stride);
    run.refined.stats.proposals = static_cast<int>(run.filtered.size());
  }

  // Forward losses against the ground truth.
  LossReport& L = run.losses;
  L.cov = focal_loss(run.cov.probA.data(), pair.gt.cov_a, cfg.loss) +
          focal_loss(run.cov.probB.data(), pair.gt.cov_b, cfg.loss);
  const Tensor dense = pair.gt.dense();
  std::vector<uint8_t> labels(dense.size());
  for (int64_t k = 0; k < dense.size(); ++k) labels[k] = dense[k] > 0.5f ? 1 : 0;
  const Tensor& P = run.scale.index == 0 ? run.assignment.P0 : run.assignment.P1;
  if (cfg.loss.match_both_directions) {
    L.match = 0.5 * (focal_loss(run.assignment.P0.data(), labels, cfg.loss) +
                     focal_loss(run.assignment.P1.data(), labels, cfg.loss));
  } else {
    L.match = focal_loss(P.data(), labels, cfg.loss);
  }
  if (cfg.refine) {
    const auto picked = sample_supervision(run.refined.matches.size(), cfg.loss,
                                           derive_seed(pair.meta.seed, kSupervisionStream));
    std::vector<RefinedMatch> sampled;
    MatchSet proposals;
    proposals.direction = run.filtered.direction;
    for (size_t k : picked) {
      sampled.push_back(run.refined.matches[k]);
      proposals.pairs.push_back({sampled.back().i, sampled.back().j, sampled.back().confidence});
    }
    const RefineLoss rl = refine_loss(sampled, gt_matches_fine(proposals, pair.geometry, stride));
    L.refine = rl.value;
    L.refine_empty = rl.empty;
  } else {
    L.refine_empty = true;
  }
  L.total = total_loss(L.cov, L.match, L.refine, cfg.loss);
  return run;
}

std::string loss_report_json(const LossReport& report) {
  json j = {{"cov", report.cov},
            {"match", report.match},
            {"refine", report.refine},
            {"total", report.total},
            {"refine_empty", report.refine_empty}};
  return j.dump(1) + "\n";
}

PairEval evaluate_pair(const std::string& name, const ScenePair& pair,
                       const std::vector<CsvMatch>& matches, const RunConfig& cfg) {
  PairEval ev;
  ev.name = name;
  ev.mode = pair.meta.mode;
  ev.bucket = bucket_name(pair.meta.bucket);
  ev.scale_ratio = pair.meta.scale_ratio;
  ev.matches = static_cast<int>(matches.size());
  const PairGeometry& g = pair.geometry;

  Correspondences corr;
  for (const CsvMatch& m : matches) corr.emplace_back(m.pA, m.pB);

  // MMA on the most confident matches.
  std::vector<size_t> order(matches.size());
  for (size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    return matches[x].confidence > matches[y].confidence;
  });
  if (order.size() > static_cast<size_t>(cfg.match_cap)) order.resize(cfg.match_cap);
  std::vector<double> dist;
  for (size_t k : order) {
    const CsvMatch& m = matches[k];
    if (g.kind == PairKind::kPlanar) {
      double d = std::numeric_limits<double>::infinity();
      try {
        d = (g.H.apply(m.pA) - m.pB).norm();
      } catch (const DegenerateError&) {
      }
      dist.push_back(d);
    } else {
      dist.push_back(projected_distance(g.frameA, g.frameB, m.pA, m.pB, g.project_options));
    }
  }
  ev.mma = mma(dist).rates;

  if (g.kind == PairKind::kPlanar) {
    std::optional<Mat3> H;
    try {
      H = ransac_homography(corr, {cfg.ransac_iterations, cfg.ransac_px, cfg.ransac_seed}).H.matrix();
    } catch (const std::runtime_error&) {
      ev.failed = true;
    }
    const CornerResult cr = corner_accuracy(H, g.H, g.width, g.height);
    ev.corner_error = cr.error;
    ev.corner_pass = cr.pass;
  } else {
    const RelativePose gt = relative_pose(g.frameA, g.frameB);
    ev.precision = epipolar_precision(corr, *g.essential(), g.frameA.K, g.frameB.K);
    try {
      const PoseEstimate est = pose_from_matches(corr, g.frameA.K, g.frameB.K,
                                                 {cfg.ransac_iterations, cfg.ransac_epipolar, cfg.ransac_seed});
      ev.rotation_error = rotation_angle_deg(est.R, gt.R);
      ev.translation_error = direction_angle_deg(est.t, gt.t, true);
      ev.pose_error = std::max(ev.rotation_error, ev.translation_error);
      ev.failed = est.degenerate;
    } catch (const std::runtime_error&) {
      ev.failed = true;
    }
    if (ev.failed) ev.pose_error = 180.0;
  }
  return ev;
}

std::string report_json(const EvalReport& report) {
  struct Group {
    std::vector<double> pose;
    std::vector<double> corner;
    int planar = 0, stereo = 0;
    double acc[3] = {0, 0, 0};
    double mma[3] = {0, 0, 0};
    double precision = 0;
    int count = 0;
  };
  std::map<std::string, Group> groups;
  json pairs = json::array();
  for (const PairEval& ev : report.pairs) {
    for (const std::string& key : {ev.bucket, std::string("all")}) {
      Group& gr = groups[key];
      ++gr.count;
      for (int t = 0; t < 3; ++t) gr.mma[t] += ev.mma[t];
      if (ev.mode == "planar") {
        ++gr.planar;
        gr.corner.push_back(ev.corner_error);
        for (int t = 0; t < 3; ++t) gr.acc[t] += ev.corner_pass[t] ? 1.0 : 0.0;
      } else {
        ++gr.stereo;
        gr.pose.push_back(ev.pose_error);
        gr.precision += ev.precision;
      }
    }
    json p = {{"name", ev.name},       {"mode", ev.mode},     {"bucket", ev.bucket},
              {"scale_ratio", ev.scale_ratio}, {"matches", ev.matches}, {"mma", ev.mma},
              {"failed", ev.failed}};
    if (ev.mode == "planar") {
      p["corner_error"] = finite_or_null(ev.corner_error);
      p["corner_pass"] = ev.corner_pass;
    } else {
      p["rotation_error"] = ev.rotation_error;
      p["translation_error"] = ev.translation_error;
      p["pose_error"] = ev.pose_error;
      p["precision"] = ev.precision;
    }
    pairs.push_back(p);
  }
  json agg = json::object();
  for (const auto& [key, gr] : groups) {
    json a = {{"pairs", gr.count}};
    a["mma"] = {gr.mma[0] / gr.count, gr.mma[1] / gr.count, gr.mma[2] / gr.count};
    if (gr.planar > 0) {
      a["corner_accuracy"] = {gr.acc[0] / gr.planar, gr.acc[1] / gr.planar, gr.acc[2] / gr.planar};
    }
    if (gr.stereo > 0) {
      a["auc"] = pose_auc(gr.pose);
      a["precision"] = gr.precision / gr.stereo;
    }
    agg[key] = a;
  }
  json j = {{"thresholds",
             {{"corner_px", {1, 3, 5}}, {"mma_px", {1, 2, 3}}, {"auc_deg", {5, 10, 20}},
              {"epipolar", 1e-4}}},
            {"aggregates", agg},
            {"pairs", pairs}};
  return j.dump(1) + "\n";
}

std::string report_csv(const EvalReport& report) {
  std::string out =
      "name,mode,bucket,scale_ratio,matches,corner_error,acc1,acc3,acc5,mma1,mma2,mma3,"
      "rotation_error,translation_error,pose_error,precision,failed\n";
  for (const PairEval& ev : report.pairs) {
    const bool planar = ev.mode == "planar";
    out += ev.name + "," + ev.mode + "," + ev.bucket + "," + num(ev.scale_ratio) + "," +
           std::to_string(ev.matches) + ",";
    out += planar ? (std::isfinite(ev.corner_error) ? num(ev.corner_error) : "inf") : "";
    for (int t = 0; t < 3; ++t) out += "," + (planar ? std::to_string(int(ev.corner_pass[t])) : "");
    for (int t = 0; t < 3; ++t) out += "," + num(ev.mma[t]);
    out += "," + (planar ? "" : num(ev.rotation_error)) + "," + (planar ? "" : num(ev.translation_error)) +
           "," + (planar ? "" : num(ev.pose_error)) + "," + (planar ? "" : num(ev.precision)) + "," +
           (ev.failed ? "1" : "0") + "\n";
  }
  return out;
}

std::string error_curve_svg(const std::vector<double>& errors, double max_x, const std::string& x_label) {
  if (errors.empty()) return "";
  constexpr double W = 400, H = 300, L = 50, B = 40, T = 20, R = 20;
  std::vector<double> e = errors;
  std::sort(e.begin(), e.end());
  auto px = [&](double x) { return L + (W - L - R) * std::min(x, max_x) / max_x; };
  auto py = [&](double y) { return H - B - (H - B - T) * y; };
  std::string pts = num(px(0)) + "," + num(py(0));
  const double n = static_cast<double>(e.size());
  for (size_t k = 0; k < e.size(); ++k) {
    if (e[k] > max_x) break;
    pts += " " + num(px(e[k])) + "," + num(py(k / n)) + " " + num(px(e[k])) + "," + num(py((k + 1) / n));
  }
  const double last = static_cast<double>(std::count_if(e.begin(), e.end(), [&](double v) { return v <= max_x; }));
  pts += " " + num(px(max_x)) + "," + num(py(last / n));
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"300\">\n";
  svg += "<rect width=\"400\" height=\"300\" fill=\"white\"/>\n";
  svg += "<line x1=\"" + num(L) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(py(0)) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(L) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(L) + "\" y2=\"" + num(py(1)) +
         "\" stroke=\"black\"/>\n";
  svg += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
  svg += "<text x=\"" + num(W / 2) + "\" y=\"" + num(H - 8) + "\" text-anchor=\"middle\" font-size=\"12\">" +
         x_label + "</text>\n";
  svg += "<text x=\"12\" y=\"" + num(H / 2) + "\" font-size=\"12\" transform=\"rotate(-90 12 " + num(H / 2) +
         ")\" text-anchor=\"middle\">fraction of pairs</text>\n";
  svg += "<text x=\"" + num(L) + "\" y=\"" + num(H - B + 14) + "\" font-size=\"10\">0</text>\n";
  svg += "<text x=\"" + num(W - R) + "\" y=\"" + num(H - B + 14) + "\" font-size=\"10\" text-anchor=\"end\">" +
         num(max_x) + "</text>\n";
  svg += "<text x=\"" + num(L - 4) + "\" y=\"" + num(py(1) + 4) + "\" font-size=\"10\" text-anchor=\"end\">1</text>\n";
  svg += "</svg>\n";
  return svg;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (int k = next++; k < n; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace adamatch
