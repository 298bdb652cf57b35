#include "adamatch/selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "adamatch/assignment.hpp"
#include "adamatch/cfi.hpp"
#include "adamatch/io.hpp"
#include "adamatch/labels.hpp"
#include "adamatch/losses.hpp"
#include "adamatch/metrics.hpp"
#include "adamatch/refine.hpp"
#include "adamatch/synthscene.hpp"

namespace adamatch {

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(9);
  ss << v;
  return ss.str();
}

SelftestResult check(const std::string& name, const std::function<std::string()>& body) {
  SelftestResult r;
  r.name = name;
  try {
    r.detail = body();
    r.ok = r.detail.rfind("FAIL", 0) != 0;
  } catch (const std::exception& e) {
    r.detail = std::string("FAIL exception: ") + e.what();
  }
  return r;
}

std::string expect(bool cond, const std::string& detail) { return cond ? detail : "FAIL " + detail; }

}  // namespace

std::vector<SelftestResult> run_selftest() {
  std::vector<SelftestResult> out;

  out.push_back(check("softmax_attention_closed_form", [] {
    // Logits ln3 and 0 after the 1/sqrt(d) scaling (d = 1).
    const Tensor q({1, 1}, {1.0f});
    const Tensor k({2, 1}, {static_cast<float>(std::log(3.0)), 0.0f});
    const Tensor v({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
    const Tensor o = attention(q, k, v, AttentionKind::kSoftmax);
    return expect(std::abs(o[0] - 0.75f) < 1e-6 && std::abs(o[1] - 0.25f) < 1e-6,
                  "out=" + fmt(o[0]) + "," + fmt(o[1]));
  }));

  out.push_back(check("cfi_swap_symmetry", [] {
    ModelDims dims;
    dims.d_model = 32;
    dims.fine_dim = 16;
    dims.heads = 4;
    const ModelWeights w = init_weights(7, dims);
    SceneConfig cfg;
    cfg.width = cfg.height = 32;
    cfg.coarse_channels = 32;
    cfg.fine_channels = 16;
    PlanarParams p;
    p.scale_ratio = 1.5;
    p.config = cfg;
    const ScenePair pair = make_planar_pair(3, p);
    const CfiOutput ab = cfi_forward(pair.descA_c, pair.descB_c, w);
    const CfiOutput ba = cfi_forward(pair.descB_c, pair.descA_c, w);
    const bool ok = ab.featA3 == ba.featB3 && ab.featB3 == ba.featA3 && ab.queryA == ba.queryB;
    return expect(ok, "exact swap");
  }));

  out.push_back(check("labels_identity_pair", [] {
    const ScenePair pair = make_planar_pair(1, 1.0, 0.0, 0.0);
    bool diag = pair.gt.positives.size() == 64;
    for (const auto& [i, j] : pair.gt.positives) diag = diag && i == j;
    return expect(diag, "positives=" + std::to_string(pair.gt.positives.size()));
  }));

  out.push_back(check("scale_estimate_eq5", [] {
    MatchSet m0;
    m0.pairs = {{0, 0, 1}, {1, 0, 1}, {2, 1, 1}, {3, 1, 1}};
    MatchSet m1;
    m1.direction = 1;
    const ScaleEstimate s = estimate_scale(m0, m1);
    return expect(s.s0 == 2.0 && s.s1 == 1.0 && s.s == 2.0 && s.index == 0, "s0=" + fmt(s.s0));
  }));

  out.push_back(check("focal_loss_closed_form", [] {
    const float p[] = {0.5f};
    const uint8_t t[] = {1};
    const double v = focal_loss(p, t);
    return expect(std::abs(v - 0.25 * 0.25 * std::log(2.0)) < 1e-9, "loss=" + fmt(v));
  }));

  out.push_back(check("pose_auc_single_step", [] {
    const double v = pose_auc({5.0}, {10.0})[0];
    return expect(std::abs(v - 0.5) < 1e-12, "auc=" + fmt(v));
  }));

  out.push_back(check("corner_accuracy_shift", [] {
    Mat3 H = Mat3::Identity();
    H(0, 2) = 4.0;
    const CornerResult r = corner_accuracy(H, Homography(), 64, 64);
    return expect(!r.pass[0] && !r.pass[1] && r.pass[2], "error=" + fmt(r.error));
  }));

  out.push_back(check("ransac_exact_homography", [] {
    Mat3 M;
    M << 0.5, -0.05, 20, 0.04, 0.52, 14, 1e-4, -2e-4, 1;
    const Homography H(M);
    Correspondences c;
    for (int k = 0; k < 100; ++k) {
      const Vec2 p(3.0 + (k % 10) * 6.1, 2.0 + (k / 10) * 5.9);
      c.emplace_back(p, H.apply(p));
    }
    const HomographyFit fit = ransac_homography(c, {200, 3.0, 1});
    const double e = corner_accuracy(fit.H.matrix(), H, 64, 64).error;
    return expect(e < 1e-3, "corner_error=" + fmt(e));
  }));

  out.push_back(check("container_round_trip", [] {
    ModelDims dims;
    dims.d_model = 16;
    dims.fine_dim = 8;
    dims.heads = 2;
    const ModelWeights w = init_weights(5, dims);
    const ModelWeights back = weights_from_tensors(decode_tensors(encode_tensors(weights_to_tensors(w))));
    return expect(back == w, "entries=" + std::to_string(w.params.size()));
  }));

  out.push_back(check("refine_identity_pair", [] {
    const ScenePair pair = make_planar_pair(2, 1.0, 0.0, 0.0);
    MatchSet m;
    for (int i = 0; i < 64; ++i) m.pairs.push_back({i, i, 1.0f});
    const ModelWeights w = zero_weights();
    const RefineResult r = refine_matches(m, pair.descA_f, pair.descB_f, {}, w, {});
    int close = 0;
    for (const RefinedMatch& rm : r.matches) close += (rm.pB - rm.pA).norm() < 0.25 ? 1 : 0;
    const bool ok = !r.matches.empty() && close >= 0.95 * r.matches.size();
    return expect(ok, std::to_string(close) + "/" + std::to_string(r.matches.size()) + " within 0.25 px");
  }));

  out.push_back(check("filter_subset", [] {
    MatchSet m;
    m.pairs = {{0, 1, 0.9f}, {1, 2, 0.8f}, {2, 3, 0.7f}};
    CoVisibleMap cov;
    cov.maskA = {1, 0, 1, 1};
    cov.maskB = {1, 1, 1, 0};
    const MatchSet f = filter_covisible(m, cov);
    return expect(f.size() == 1 && f.pairs[0].i == 0, "kept=" + std::to_string(f.size()));
  }));

  return out;
}

}  // namespace adamatch
