#include "adamatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "adamatch/errors.hpp"
#include "adamatch/rng.hpp"

namespace adamatch {

namespace {

// Similarity transform moving the centroid to 0 and mean distance to sqrt(2).
Mat3 hartley(const std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double dist = 0.0;
  for (const Vec2& p : pts) dist += (p - mean).norm();
  dist /= static_cast<double>(pts.size());
  const double s = dist > 1e-12 ? std::sqrt(2.0) / dist : 1.0;
  Mat3 T;
  T << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
  return T;
}

Vec2 apply_affine(const Mat3& T, const Vec2& p) {
  return {T(0, 0) * p.x() + T(0, 2), T(1, 1) * p.y() + T(1, 2)};
}

// Distinct random indices.
std::vector<int> draw(Rng& rng, int n, int k) {
  std::vector<int> out;
  while (static_cast<int>(out.size()) < k) {
    const int v = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

Correspondences subset(const Correspondences& all, const std::vector<int>& idx) {
  Correspondences out;
  out.reserve(idx.size());
  for (int k : idx) out.push_back(all[k]);
  return out;
}

double transfer_error(const Mat3& H, const Correspondence& m) {
  const Vec3 q = H * m.first.homogeneous();
  if (std::abs(q.z()) < 1e-12) return std::numeric_limits<double>::infinity();
  return (q.hnormalized() - m.second).norm();
}

}  // namespace

Homography fit_homography_dlt(const Correspondences& matches) {
  if (matches.size() < 4) throw InsufficientDataError("homography needs at least 4 matches");
  std::vector<Vec2> a, b;
  for (const auto& [pa, pb] : matches) {
    a.push_back(pa);
    b.push_back(pb);
  }
  const Mat3 Ta = hartley(a), Tb = hartley(b);
  Eigen::MatrixXd A(2 * matches.size(), 9);
  for (size_t k = 0; k < matches.size(); ++k) {
    const Vec2 p = apply_affine(Ta, a[k]), q = apply_affine(Tb, b[k]);
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    A.row(2 * k) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    A.row(2 * k + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 H = Tb.inverse() * Hn * Ta;
  if (!H.allFinite() || std::abs(H.determinant()) < 1e-12 * std::pow(H.norm(), 3)) {
    throw DegenerateError("homography fit is singular");
  }
  return Homography(H);
}

HomographyFit ransac_homography(const Correspondences& matches, const RansacConfig& cfg) {
  const int n = static_cast<int>(matches.size());
  if (n < 4) throw InsufficientDataError("ransac_homography needs at least 4 matches");
  Rng rng(cfg.seed);
  int best_count = -1;
  std::vector<uint8_t> best_mask;
  auto score = [&](const Mat3& H, std::vector<uint8_t>& mask) {
    int count = 0;
    mask.assign(n, 0);
    for (int k = 0; k < n; ++k) {
      if (transfer_error(H, matches[k]) < cfg.threshold) {
        mask[k] = 1;
        ++count;
      }
    }
    return count;
  };
  std::vector<uint8_t> mask;
  for (int it = 0; it < cfg.iterations; ++it) {
    Homography H;
    try {
      H = fit_homography_dlt(subset(matches, draw(rng, n, 4)));
    } catch (const DegenerateError&) {
      continue;
    }
    const int count = score(H.matrix(), mask);
    if (count > best_count) {
      best_count = count;
      best_mask = mask;
    }
    if (best_count == n) break;
  }
  if (best_count < 4) throw DegenerateError("ransac_homography found no model");

  // Refit on inliers, then once more on the refit's inliers.
  HomographyFit fit;
  Correspondences in;
  for (int k = 0; k < n; ++k)
    if (best_mask[k]) in.push_back(matches[k]);
  fit.H = fit_homography_dlt(in);
  fit.inlier_count = score(fit.H.matrix(), fit.inliers);
  if (fit.inlier_count < best_count) {
    fit.inliers = best_mask;
    fit.inlier_count = best_count;
  }
  return fit;
}

EssentialFit fit_essential(const Correspondences& normalized) {
  if (normalized.size() < 8) throw InsufficientDataError("essential matrix needs at least 8 matches");
  std::vector<Vec2> a, b;
  for (const auto& [pa, pb] : normalized) {
    a.push_back(pa);
    b.push_back(pb);
  }
  const Mat3 Ta = hartley(a), Tb = hartley(b);
  Eigen::MatrixXd A(normalized.size(), 9);
  for (size_t k = 0; k < normalized.size(); ++k) {
    const Vec3 p = apply_affine(Ta, a[k]).homogeneous(), q = apply_affine(Tb, b[k]).homogeneous();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) A(k, 3 * r + c) = q(r) * p(c);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  EssentialFit fit;
  // Second-smallest singular value of the 9-column system.
  if (A.rows() >= 9) {
    fit.degenerate = sv(7) < 1e-8 * sv(0);
  } else {
    fit.degenerate = sv(sv.size() - 1) < 1e-8 * sv(0);
  }
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Mat3 En;
  En << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  Mat3 E = Tb.transpose() * En * Ta;
  // Project onto the essential manifold: singular values (1, 1, 0).
  Eigen::JacobiSVD<Mat3> esvd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  E = esvd.matrixU() * Vec3(1, 1, 0).asDiagonal() * esvd.matrixV().transpose();
  fit.E = E / E.norm();
  return fit;
}

std::pair<Mat3, Vec3> decompose_essential(const Mat3& E, const Correspondences& normalized) {
  Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU(), V = svd.matrixV();
  if (U.determinant() < 0) U = -U;
  if (V.determinant() < 0) V = -V;
  Mat3 W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 R1 = U * W * V.transpose(), R2 = U * W.transpose() * V.transpose();
  const Vec3 t = U.col(2);

  int best = -1;
  std::pair<Mat3, Vec3> out{R1, t};
  for (const Mat3& R : {R1, R2}) {
    for (const Vec3& tc : {Vec3(t), Vec3(-t)}) {
      int front = 0;
      for (const auto& [pa, pb] : normalized) {
        // Depths (za, zb) with zb * xb = R * (za * xa) + t, least squares.
        const Vec3 xa = pa.homogeneous(), xb = pb.homogeneous();
        Eigen::Matrix<double, 3, 2> M;
        M.col(0) = R * xa;
        M.col(1) = -xb;
        const Eigen::Vector2d z = M.colPivHouseholderQr().solve(-tc);
        if (z(0) > 0 && z(1) > 0) ++front;
      }
      if (front > best) {
        best = front;
        out = {R, tc};
      }
    }
  }
  return out;
}

PoseEstimate pose_from_matches(const Correspondences& matches, const Mat3& KA, const Mat3& KB,
                               const RansacConfig& cfg) {
  const int n = static_cast<int>(matches.size());
  if (n < 8) throw InsufficientDataError("pose_from_matches needs at least 8 matches");
  Correspondences norm;
  norm.reserve(n);
  for (const auto& [pa, pb] : matches) norm.emplace_back(normalize_point(KA, pa), normalize_point(KB, pb));

  Rng rng(cfg.seed);
  int best_count = -1;
  std::vector<uint8_t> best_mask, mask;
  auto score = [&](const Mat3& E, std::vector<uint8_t>& m) {
    int count = 0;
    m.assign(n, 0);
    for (int k = 0; k < n; ++k) {
      if (epipolar_error(E, norm[k].first, norm[k].second) < cfg.threshold) {
        m[k] = 1;
        ++count;
      }
    }
    return count;
  };
  for (int it = 0; it < cfg.iterations; ++it) {
    const EssentialFit fit = fit_essential(subset(norm, draw(rng, n, 8)));
    if (fit.degenerate) continue;
    const int count = score(fit.E, mask);
    if (count > best_count) {
      best_count = count;
      best_mask = mask;
    }
    if (best_count == n) break;
  }

  PoseEstimate est;
  Correspondences in;
  if (best_count >= 8) {
    for (int k = 0; k < n; ++k)
      if (best_mask[k]) in.push_back(norm[k]);
  } else {
    // Every minimal sample was degenerate; report the all-points fit.
    in = norm;
  }
  const EssentialFit fit = fit_essential(in);
  est.E = fit.E;
  est.degenerate = fit.degenerate;
  est.inlier_count = score(fit.E, est.inliers);
  const auto [R, t] = decompose_essential(fit.E, in);
  est.R = R;
  est.t = t.normalized();
  return est;
}

double pose_error_deg(const Mat3& R_est, const Vec3& t_est, const Mat3& R_gt, const Vec3& t_gt) {
  return std::max(rotation_angle_deg(R_est, R_gt), direction_angle_deg(t_est, t_gt, true));
}

std::vector<double> pose_auc(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  if (errors.empty()) throw std::invalid_argument("pose_auc: empty error list");
  for (double e : errors) {
    if (!(e >= 0.0)) throw std::invalid_argument("pose_auc: errors must be non-negative");
  }
  std::vector<double> out;
  for (double t : thresholds) {
    if (!(t > 0.0)) throw std::invalid_argument("pose_auc: thresholds must be positive");
    double area = 0.0;
    for (double e : errors) area += std::max(0.0, t - e);
    out.push_back(area / (t * static_cast<double>(errors.size())));
  }
  return out;
}

RateResult mma(const std::vector<double>& distances, const std::vector<double>& thresholds) {
  RateResult out;
  out.empty = distances.empty();
  for (double t : thresholds) {
    if (out.empty) {
      out.rates.push_back(0.0);
      continue;
    }
    const auto hits = std::count_if(distances.begin(), distances.end(),
                                    [t](double d) { return d < t; });
    out.rates.push_back(static_cast<double>(hits) / static_cast<double>(distances.size()));
  }
  return out;
}

double epipolar_precision(const Correspondences& matches, const Mat3& E_gt, const Mat3& KA,
                          const Mat3& KB, double threshold) {
  if (matches.empty()) return 0.0;
  int good = 0;
  for (const auto& [pa, pb] : matches) {
    if (epipolar_error(E_gt, normalize_point(KA, pa), normalize_point(KB, pb)) < threshold) ++good;
  }
  return static_cast<double>(good) / static_cast<double>(matches.size());
}

CornerResult corner_accuracy(const std::optional<Mat3>& H_est, const Homography& H_gt, int width,
                             int height, const std::vector<double>& thresholds) {
  CornerResult out;
  out.error = std::numeric_limits<double>::infinity();
  out.pass.assign(thresholds.size(), false);
  if (!H_est) {
    out.degenerate = true;
    return out;
  }
  try {
    const Homography est(*H_est);
    const Vec2 corners[4] = {{0, 0}, {double(width), 0}, {0, double(height)},
                             {double(width), double(height)}};
    double acc = 0.0;
    for (const Vec2& c : corners) acc += (est.apply(c) - H_gt.apply(c)).norm();
    out.error = acc / 4.0;
  } catch (const std::exception&) {
    out.degenerate = true;
    return out;
  }
  if (!std::isfinite(out.error)) {
    out.degenerate = true;
    return out;
  }
  for (size_t k = 0; k < thresholds.size(); ++k) out.pass[k] = out.error < thresholds[k];
  return out;
}

}  // namespace adamatch
