#pragma once

// Cross-channel alignment: homography estimation from point correspondences
// (Hartley-normalized DLT inside a RANSAC loop) and bilinear image warping.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tactile/tensor.hpp"
#include "tactile/types.hpp"

namespace tactile {

struct PointPair {
  double x, y;    // source image
  double xp, yp;  // target image
};

struct Correspondences {
  std::vector<PointPair> pairs;
};

/// 3x3 projective map, normalized so h33 = 1.
struct Homography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();

  static Homography identity() { return Homography{}; }

  static Homography translation(double dx, double dy) {
    Homography t;
    t.h(0, 2) = dx;
    t.h(1, 2) = dy;
    return t;
  }

  Homography inverse() const {
    Homography inv;
    inv.h = h.inverse();
    if (std::abs(inv.h(2, 2)) > 1e-12) inv.h /= inv.h(2, 2);
    return inv;
  }

  /// Maps (x, y) through the homography with perspective division.
  std::pair<double, double> apply(double x, double y) const {
    double w = h(2, 0) * x + h(2, 1) * y + h(2, 2);
    return {(h(0, 0) * x + h(0, 1) * y + h(0, 2)) / w,
            (h(1, 0) * x + h(1, 1) * y + h(1, 2)) / w};
  }
};

namespace detail {

inline Eigen::Matrix3d hartley_normalization(const std::vector<PointPair>& pairs, bool target) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pairs) {
    cx += target ? p.xp : p.x;
    cy += target ? p.yp : p.y;
  }
  cx /= pairs.size();
  cy /= pairs.size();
  double mean_dist = 0.0;
  for (const auto& p : pairs) {
    double dx = (target ? p.xp : p.x) - cx;
    double dy = (target ? p.yp : p.y) - cy;
    mean_dist += std::sqrt(dx * dx + dy * dy);
  }
  mean_dist /= pairs.size();
  double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

}  // namespace detail

/// Normalized DLT solution minimizing algebraic error; exact for consistent
/// noise-free inputs. Throws on <4 pairs or degenerate configurations.
inline Homography estimate_homography(const Correspondences& c) {
  const auto& pairs = c.pairs;
  detail::require(pairs.size() >= 4, "estimate_homography: need at least 4 correspondences");
  for (const auto& p : pairs) {
    detail::require(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.xp) &&
                        std::isfinite(p.yp),
                    "estimate_homography: non-finite coordinates");
  }

  Eigen::Matrix3d t_src = detail::hartley_normalization(pairs, false);
  Eigen::Matrix3d t_dst = detail::hartley_normalization(pairs, true);

  Eigen::MatrixXd a(2 * pairs.size(), 9);
  for (size_t k = 0; k < pairs.size(); ++k) {
    Eigen::Vector3d s = t_src * Eigen::Vector3d(pairs[k].x, pairs[k].y, 1.0);
    Eigen::Vector3d d = t_dst * Eigen::Vector3d(pairs[k].xp, pairs[k].yp, 1.0);
    double x = s(0), y = s(1), xp = d(0), yp = d(1);
    a.row(2 * k) << -x, -y, -1, 0, 0, 0, xp * x, xp * y, xp;
    a.row(2 * k + 1) << 0, 0, 0, -x, -y, -1, yp * x, yp * y, yp;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Two vanishing singular values mean the solution is not unique
  // (e.g. collinear points).
  if (sv(7) <= 1e-10 * sv(0)) {
    throw std::runtime_error("estimate_homography: degenerate correspondence configuration");
  }
  Eigen::VectorXd hvec = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << hvec(0), hvec(1), hvec(2), hvec(3), hvec(4), hvec(5), hvec(6), hvec(7), hvec(8);

  Eigen::Matrix3d h = t_dst.inverse() * hn * t_src;
  if (std::abs(h(2, 2)) < 1e-12 * h.norm()) {
    throw std::runtime_error("estimate_homography: cannot normalize h33");
  }
  h /= h(2, 2);
  if (std::abs(h.determinant()) <= 1e-12) {
    throw std::runtime_error("estimate_homography: singular homography");
  }
  Homography out;
  out.h = h;
  return out;
}

struct RansacResult {
  Homography homography;
  std::vector<uint8_t> inliers;
  int inlier_count = 0;
};

/// RANSAC over minimal 4-point samples, scored by symmetric transfer error;
/// the best consensus set is refit with the full DLT and the reported inlier
/// mask is recomputed against the refit model. Deterministic per seed.
inline RansacResult ransac_homography(const Correspondences& c, double threshold_px,
                                      int iterations, uint32_t seed) {
  const auto& pairs = c.pairs;
  detail::require(pairs.size() >= 4, "ransac_homography: need at least 4 correspondences");
  detail::require(threshold_px > 0.0, "ransac_homography: threshold must be positive");
  detail::require(iterations >= 1, "ransac_homography: iterations must be >= 1");

  const size_t n = pairs.size();
  std::mt19937 rng(seed);

  auto classify = [&](const Homography& h, std::vector<uint8_t>& mask) -> int {
    Homography hinv = h.inverse();
    int count = 0;
    for (size_t k = 0; k < n; ++k) {
      auto [fx, fy] = h.apply(pairs[k].x, pairs[k].y);
      auto [bx, by] = hinv.apply(pairs[k].xp, pairs[k].yp);
      double fwd = std::hypot(fx - pairs[k].xp, fy - pairs[k].yp);
      double bwd = std::hypot(bx - pairs[k].x, by - pairs[k].y);
      bool in = std::max(fwd, bwd) < threshold_px;
      mask[k] = in ? 1 : 0;
      count += in ? 1 : 0;
    }
    return count;
  };

  std::vector<uint8_t> mask(n, 0), best_mask(n, 0);
  int best_count = 0;
  double best_err = 0.0;
  bool found = false;

  std::array<size_t, 4> idx{};
  for (int it = 0; it < iterations; ++it) {
    // Draw 4 distinct indices.
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        idx[k] = rng() % n;
        fresh = true;
        for (int m = 0; m < k; ++m) fresh = fresh && idx[m] != idx[k];
      } while (!fresh);
    }
    Correspondences minimal;
    for (size_t i : idx) minimal.pairs.push_back(pairs[i]);
    Homography h;
    try {
      h = estimate_homography(minimal);
    } catch (const std::runtime_error&) {
      continue;  // degenerate sample
    }
    int count = classify(h, mask);
    if (count < 4) continue;
    double err = 0.0;
    for (size_t k = 0; k < n; ++k) {
      if (!mask[k]) continue;
      auto [fx, fy] = h.apply(pairs[k].x, pairs[k].y);
      err += std::hypot(fx - pairs[k].xp, fy - pairs[k].yp);
    }
    if (count > best_count || (count == best_count && found && err < best_err)) {
      best_count = count;
      best_err = err;
      best_mask = mask;
      found = true;
    }
  }

  if (!found) {
    throw std::runtime_error("ransac_homography: no model with at least 4 inliers");
  }

  Correspondences consensus;
  for (size_t k = 0; k < n; ++k) {
    if (best_mask[k]) consensus.pairs.push_back(pairs[k]);
  }
  RansacResult result;
  result.homography = estimate_homography(consensus);
  result.inliers.assign(n, 0);
  result.inlier_count = classify(result.homography, result.inliers);
  if (result.inlier_count < 4) {
    throw std::runtime_error("ransac_homography: refit lost the consensus set");
  }
  return result;
}

/// Applies the homography to the image content via inverse-mapped bilinear
/// resampling; samples falling outside the source are zero.
inline Tensor3D warp_image(const Tensor3D& src, const Homography& h) {
  Homography hinv = h.inverse();
  Tensor3D out(src.height, src.width, src.channels, 0.0f);
  for (int i = 0; i < src.height; ++i) {
    for (int j = 0; j < src.width; ++j) {
      auto [x, y] = hinv.apply(static_cast<double>(j), static_cast<double>(i));
      if (x < 0.0 || y < 0.0 || x > src.width - 1.0 || y > src.height - 1.0) continue;
      int x0 = static_cast<int>(std::floor(x));
      int y0 = static_cast<int>(std::floor(y));
      double fx = x - x0, fy = y - y0;
      int x1 = std::min(x0 + 1, src.width - 1);
      int y1 = std::min(y0 + 1, src.height - 1);
      for (int ch = 0; ch < src.channels; ++ch) {
        double v00 = src.at(y0, x0, ch), v01 = src.at(y0, x1, ch);
        double v10 = src.at(y1, x0, ch), v11 = src.at(y1, x1, ch);
        double v = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) +
                   fy * ((1.0 - fx) * v10 + fx * v11);
        out.at(i, j, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

inline MultiModalFrame warp_frame(const MultiModalFrame& frame, const Homography& h) {
  if (std::abs(h.h.determinant()) <= 1e-12) {
    throw std::invalid_argument("warp_frame: homography is not invertible");
  }
  return MultiModalFrame(warp_image(frame.rgb, h), warp_image(frame.nir, h));
}

// --- Correspondence files: one "x y x' y'" quadruple per line. --------------

inline Correspondences load_correspondences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open correspondence file '" + path + "'");
  Correspondences c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = line.substr(0, line.find('#'));
    std::istringstream iss(body);
    PointPair p;
    if (!(iss >> p.x)) continue;  // blank or comment line
    if (!(iss >> p.y >> p.xp >> p.yp)) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected 'x y x_prime y_prime'");
    }
    c.pairs.push_back(p);
  }
  return c;
}

inline void save_correspondences(const Correspondences& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& p : c.pairs) {
    out << p.x << " " << p.y << " " << p.xp << " " << p.yp << "\n";
  }
}

inline void save_homography(const Homography& h, const std::string& path) {
  Tensor2D t(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) t.at(i, j) = static_cast<float>(h.h(i, j));
  }
  save_tensor(t, path);
}

inline Homography load_homography(const std::string& path) {
  Tensor2D t = load_tensor2d(path);
  if (t.height != 3 || t.width != 3) throw IoError("load_homography: expected a 3x3 tensor");
  Homography h;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) h.h(i, j) = t.at(i, j);
  }
  return h;
}

}  // namespace tactile
