#pragma once

// Domain types shared by the whole pipeline: aligned RGB+NIR frames,
// surface-normal maps (unit or [0,1]-encoded) and indentation depth maps.

#include <algorithm>
#include <cmath>

#include "tactile/tensor.hpp"

namespace tactile {

enum class NormalEncoding { Unit, Encoded01 };

inline const char* to_string(NormalEncoding e) {
  return e == NormalEncoding::Unit ? "unit" : "encoded01";
}

/// Per-pixel surface normals. In Unit encoding every pixel is a unit vector
/// (or the all-zero vector from the epsilon-guarded degenerate case); in
/// Encoded01 every component lives in [0,1] via n_enc = 0.5*n + 0.5.
struct NormalMap {
  Tensor3D normals;
  NormalEncoding encoding = NormalEncoding::Unit;

  NormalMap() = default;

  NormalMap(Tensor3D t, NormalEncoding e) : normals(std::move(t)), encoding(e) {
    detail::require(normals.channels == 3, "NormalMap: expected 3 channels");
    if (encoding == NormalEncoding::Unit) {
      for (int i = 0; i < normals.height; ++i) {
        for (int j = 0; j < normals.width; ++j) {
          double nx = normals.at(i, j, 0), ny = normals.at(i, j, 1), nz = normals.at(i, j, 2);
          double n = std::sqrt(nx * nx + ny * ny + nz * nz);
          detail::require(n <= 1e-6 || std::abs(n - 1.0) <= 1e-6,
                          "NormalMap: unit encoding requires per-pixel norm 1 (or 0)");
        }
      }
    } else {
      for (float v : normals.data) {
        detail::require(v >= 0.0f && v <= 1.0f, "NormalMap: encoded01 values must lie in [0,1]");
      }
    }
  }

  int height() const { return normals.height; }
  int width() const { return normals.width; }
};

/// n -> 0.5*n + 0.5 per component. Input must be in unit encoding.
inline NormalMap encode_normals(const NormalMap& n) {
  detail::require(n.encoding == NormalEncoding::Unit,
                  "encode_normals: input must be in unit encoding");
  Tensor3D out(n.normals.height, n.normals.width, 3);
  for (size_t k = 0; k < n.normals.data.size(); ++k) {
    out.data[k] = std::clamp(0.5f * n.normals.data[k] + 0.5f, 0.0f, 1.0f);
  }
  return NormalMap(std::move(out), NormalEncoding::Encoded01);
}

/// Inverse of encode_normals. Vectors whose norm drifted from 1 by more than
/// 1e-6 (e.g. after 8-bit quantization) are re-normalized; near-zero vectors
/// stay the degenerate zero vector.
inline NormalMap decode_normals(const NormalMap& n) {
  detail::require(n.encoding == NormalEncoding::Encoded01,
                  "decode_normals: input must be in encoded01 encoding");
  Tensor3D out(n.normals.height, n.normals.width, 3);
  for (int i = 0; i < n.normals.height; ++i) {
    for (int j = 0; j < n.normals.width; ++j) {
      double v[3];
      for (int c = 0; c < 3; ++c) v[c] = 2.0 * n.normals.at(i, j, c) - 1.0;
      double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      if (norm <= 1e-6) {
        v[0] = v[1] = v[2] = 0.0;
      } else if (std::abs(norm - 1.0) > 1e-6) {
        for (double& c : v) c /= norm;
      }
      for (int c = 0; c < 3; ++c) out.at(i, j, c) = static_cast<float>(v[c]);
    }
  }
  return NormalMap(std::move(out), NormalEncoding::Unit);
}

/// Indentation depth of the gel in millimeters, positive into the gel.
/// `pitch_mm` is the physical size of one pixel.
struct DepthMap {
  Tensor2D depth;
  float pitch_mm = 0.0f;

  DepthMap() = default;

  DepthMap(Tensor2D d, float pitch) : depth(std::move(d)), pitch_mm(pitch) {
    detail::require(pitch_mm > 0.0f && std::isfinite(pitch_mm),
                    "DepthMap: pitch must be positive");
  }

  int height() const { return depth.height; }
  int width() const { return depth.width; }
};

/// Aligned RGB (3-channel) + NIR (1-channel) capture of the gel surface,
/// both in [0,1] and sharing the same viewport.
struct MultiModalFrame {
  Tensor3D rgb;
  Tensor3D nir;

  MultiModalFrame() = default;

  MultiModalFrame(Tensor3D rgb_in, Tensor3D nir_in)
      : rgb(std::move(rgb_in)), nir(std::move(nir_in)) {
    detail::require(rgb.channels == 3, "MultiModalFrame: rgb must have 3 channels");
    detail::require(nir.channels == 1, "MultiModalFrame: nir must have 1 channel");
    detail::require(rgb.height == nir.height && rgb.width == nir.width,
                    "MultiModalFrame: rgb and nir must share the same viewport");
    for (float v : rgb.data) {
      detail::require(v >= 0.0f && v <= 1.0f, "MultiModalFrame: rgb values must lie in [0,1]");
    }
    for (float v : nir.data) {
      detail::require(v >= 0.0f && v <= 1.0f, "MultiModalFrame: nir values must lie in [0,1]");
    }
  }

  int height() const { return rgb.height; }
  int width() const { return rgb.width; }

  /// Channel value in the fixed (R,G,B,NIR) order used everywhere a 4-channel
  /// concatenation appears.
  float channel(int i, int j, int c) const {
    return c < 3 ? rgb.at(i, j, c) : nir.at(i, j, 0);
  }
};

}  // namespace tactile
