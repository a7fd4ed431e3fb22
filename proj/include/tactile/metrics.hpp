#pragma once

// Quantitative evaluation: angular error between normal maps (degrees) and
// depth RMSE. Reductions use ordered pairwise summation so results do not
// depend on accumulation luck.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "tactile/types.hpp"

namespace tactile {

namespace detail {

inline double pairwise_sum(const std::vector<double>& v, size_t lo, size_t hi) {
  if (hi - lo <= 64) {
    double s = 0.0;
    for (size_t k = lo; k < hi; ++k) s += v[k];
    return s;
  }
  size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : pairwise_sum(v, 0, v.size()) / static_cast<double>(v.size());
}

inline NormalMap as_unit(const NormalMap& n) {
  return n.encoding == NormalEncoding::Unit ? n : decode_normals(n);
}

}  // namespace detail

/// Mean over masked pixels of acos(pred . gt), in degrees. Accepts unit or
/// encoded01 maps; a null mask selects every pixel.
inline double angular_mae(const NormalMap& pred, const NormalMap& gt,
                          const Tensor2D* mask = nullptr) {
  detail::require(pred.normals.height == gt.normals.height &&
                      pred.normals.width == gt.normals.width,
                  "angular_mae: shape mismatch");
  if (mask) {
    detail::require(mask->height == pred.height() && mask->width == pred.width(),
                    "angular_mae: mask shape mismatch");
  }
  NormalMap p = detail::as_unit(pred);
  NormalMap g = detail::as_unit(gt);
  // Directions are re-normalized in double: acos is sqrt-sensitive near 1, so
  // float32 norm error alone would otherwise floor the metric at ~0.01 deg.
  auto unit3 = [](const Tensor3D& t, int i, int j, double* v) {
    for (int c = 0; c < 3; ++c) v[c] = t.at(i, j, c);
    double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-12) {
      for (int c = 0; c < 3; ++c) v[c] /= n;
    }
  };
  std::vector<double> angles;
  angles.reserve(static_cast<size_t>(p.height()) * p.width());
  for (int i = 0; i < p.height(); ++i) {
    for (int j = 0; j < p.width(); ++j) {
      if (mask && mask->at(i, j) == 0.0f) continue;
      double a[3], b[3];
      unit3(p.normals, i, j, a);
      unit3(g.normals, i, j, b);
      double dot = std::clamp(a[0] * b[0] + a[1] * b[1] + a[2] * b[2], -1.0, 1.0);
      angles.push_back(std::acos(dot) * 180.0 / std::numbers::pi);
    }
  }
  detail::require(!angles.empty(), "angular_mae: empty mask");
  return detail::pairwise_mean(angles);
}

/// Root mean squared depth difference over the mask, in millimeters.
inline double depth_rmse(const DepthMap& pred, const DepthMap& gt, const Tensor2D* mask = nullptr) {
  detail::require(pred.depth.same_shape(gt.depth), "depth_rmse: shape mismatch");
  detail::require(std::abs(pred.pitch_mm - gt.pitch_mm) <= 1e-6f * std::max(pred.pitch_mm, 1.0f),
                  "depth_rmse: pitch mismatch");
  if (mask) {
    detail::require(mask->height == pred.height() && mask->width == pred.width(),
                    "depth_rmse: mask shape mismatch");
  }
  std::vector<double> sq;
  sq.reserve(pred.depth.size());
  for (int i = 0; i < pred.height(); ++i) {
    for (int j = 0; j < pred.width(); ++j) {
      if (mask && mask->at(i, j) == 0.0f) continue;
      double d = double(pred.depth.at(i, j)) - double(gt.depth.at(i, j));
      sq.push_back(d * d);
    }
  }
  detail::require(!sq.empty(), "depth_rmse: empty mask");
  return std::sqrt(detail::pairwise_mean(sq));
}

/// Pixels where the ground-truth indentation is positive.
inline Tensor2D contact_mask(const DepthMap& gt) {
  Tensor2D mask(gt.height(), gt.width(), 0.0f);
  for (int i = 0; i < gt.height(); ++i) {
    for (int j = 0; j < gt.width(); ++j) {
      mask.at(i, j) = gt.depth.at(i, j) > 0.0f ? 1.0f : 0.0f;
    }
  }
  return mask;
}

/// All-ones mask with `margin` border pixels cleared.
inline Tensor2D interior_mask(int height, int width, int margin) {
  detail::require(margin >= 0 && 2 * margin < height && 2 * margin < width,
                  "interior_mask: margin too large");
  Tensor2D mask(height, width, 0.0f);
  for (int i = margin; i < height - margin; ++i) {
    for (int j = margin; j < width - margin; ++j) mask.at(i, j) = 1.0f;
  }
  return mask;
}

inline Tensor2D intersect_masks(const Tensor2D& a, const Tensor2D& b) {
  detail::require(a.same_shape(b), "intersect_masks: shape mismatch");
  Tensor2D out(a.height, a.width, 0.0f);
  for (size_t k = 0; k < a.data.size(); ++k) {
    out.data[k] = (a.data[k] != 0.0f && b.data[k] != 0.0f) ? 1.0f : 0.0f;
  }
  return out;
}

/// Per-item evaluation record for one estimator condition.
struct ItemResult {
  std::string item;
  double mae_deg = 0.0;
  double mae_contact_deg = 0.0;
  double depth_rmse_mm = 0.0;
};

struct ConditionResult {
  std::string label;
  double mae_deg = 0.0;          // mean over items, full-image mask
  double mae_contact_deg = 0.0;  // mean over items, contact-only mask
  double depth_rmse_mm = 0.0;
  std::vector<ItemResult> items;
};

}  // namespace tactile
