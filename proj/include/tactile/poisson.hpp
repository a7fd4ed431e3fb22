#pragma once

// Depth reconstruction from normal maps: gradient extraction and a direct
// Poisson solve. The 5-point Laplacian with homogeneous Dirichlet borders is
// diagonalized by a type-I discrete sine transform (FFTW RODFT00), so the
// solve is exact for the discrete system up to roundoff.

#include <fftw3.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "tactile/types.hpp"

namespace tactile {

/// Surface slope field in mm per mm; pitch gives the pixel spacing.
struct GradientField {
  Tensor2D gx;
  Tensor2D gy;
  float pitch_mm = 0.0f;

  GradientField() = default;

  GradientField(Tensor2D gx_in, Tensor2D gy_in, float pitch)
      : gx(std::move(gx_in)), gy(std::move(gy_in)), pitch_mm(pitch) {
    detail::require(gx.same_shape(gy), "GradientField: gx and gy must share shape");
    detail::require(pitch_mm > 0.0f && std::isfinite(pitch_mm),
                    "GradientField: pitch must be positive");
  }
};

/// gx = -nx / max(nz, clamp_nz); the clamp keeps rim pixels (nz -> 0) finite.
inline GradientField gradients_from_normals(const NormalMap& normals, float pitch_mm,
                                            float clamp_nz = 0.05f) {
  detail::require(normals.encoding == NormalEncoding::Unit,
                  "gradients_from_normals: normals must be in unit encoding");
  detail::require(clamp_nz > 0.0f, "gradients_from_normals: clamp must be positive");
  const Tensor3D& n = normals.normals;
  Tensor2D gx(n.height, n.width);
  Tensor2D gy(n.height, n.width);
  for (int i = 0; i < n.height; ++i) {
    for (int j = 0; j < n.width; ++j) {
      float nz = std::max(n.at(i, j, 2), clamp_nz);
      gx.at(i, j) = -n.at(i, j, 0) / nz;
      gy.at(i, j) = -n.at(i, j, 1) / nz;
    }
  }
  return GradientField(std::move(gx), std::move(gy), pitch_mm);
}

namespace detail {

struct FftwPlan {
  fftw_plan plan = nullptr;
  explicit FftwPlan(fftw_plan p) : plan(p) {}
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  ~FftwPlan() {
    if (plan) fftw_destroy_plan(plan);
  }
};

}  // namespace detail

/// Integrates a gradient field into depth by solving lap(d) = div(g) with
/// d = 0 on the image border. Divergence uses central differences on the
/// interior; the solve runs in double precision.
inline DepthMap fast_poisson(const GradientField& g, bool clip_negative = false) {
  const int height = g.gx.height;
  const int width = g.gx.width;
  detail::require(height >= 3 && width >= 3, "fast_poisson: field must be at least 3x3");
  const double h = g.pitch_mm;
  const int m = height - 2;  // interior rows
  const int n = width - 2;   // interior cols

  std::vector<double> buf(static_cast<size_t>(m) * n);
  detail::FftwPlan plan(fftw_plan_r2r_2d(m, n, buf.data(), buf.data(), FFTW_RODFT00,
                                         FFTW_RODFT00, FFTW_ESTIMATE));
  if (!plan.plan) throw std::runtime_error("fast_poisson: FFTW plan creation failed");

  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j <= n; ++j) {
      double ddx = (double(g.gx.at(i, j + 1)) - double(g.gx.at(i, j - 1))) / (2.0 * h);
      double ddy = (double(g.gy.at(i + 1, j)) - double(g.gy.at(i - 1, j))) / (2.0 * h);
      buf[static_cast<size_t>(i - 1) * n + (j - 1)] = ddx + ddy;
    }
  }

  fftw_execute(plan.plan);

  std::vector<double> row_eig(m), col_eig(n);
  for (int p = 0; p < m; ++p) {
    row_eig[p] = 2.0 * std::cos(std::numbers::pi * (p + 1) / (m + 1)) - 2.0;
  }
  for (int q = 0; q < n; ++q) {
    col_eig[q] = 2.0 * std::cos(std::numbers::pi * (q + 1) / (n + 1)) - 2.0;
  }
  const double h2 = h * h;
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < n; ++q) {
      buf[static_cast<size_t>(p) * n + q] /= (row_eig[p] + col_eig[q]) / h2;
    }
  }

  fftw_execute(plan.plan);

  const double norm = 1.0 / (4.0 * (m + 1) * (n + 1));
  Tensor2D depth(height, width, 0.0f);
  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j <= n; ++j) {
      double v = buf[static_cast<size_t>(i - 1) * n + (j - 1)] * norm;
      if (clip_negative && v < 0.0) v = 0.0;
      depth.at(i, j) = static_cast<float>(v);
    }
  }
  return DepthMap(std::move(depth), g.pitch_mm);
}

}  // namespace tactile
