#pragma once

// The two-step reconstruction pipeline: estimate a normal map (network or
// LUT), then integrate its gradient field into depth.

#include <string>

#include "tactile/lut.hpp"
#include "tactile/pfsnn.hpp"
#include "tactile/poisson.hpp"

namespace tactile {

enum class Modality { Rgb, RgbNir };

inline const char* to_string(Modality m) { return m == Modality::Rgb ? "rgb" : "rgb+nir"; }

inline Modality modality_from_string(const std::string& s) {
  if (s == "rgb") return Modality::Rgb;
  if (s == "rgb+nir") return Modality::RgbNir;
  throw std::invalid_argument("unknown modality '" + s + "' (expected rgb or rgb+nir)");
}

/// RGB-only operation keeps the 8-channel layout and zeroes the NIR planes;
/// the same rule must be applied at train and inference time.
inline MultiModalFrame apply_modality(const MultiModalFrame& frame, Modality m) {
  if (m == Modality::RgbNir) return frame;
  Tensor3D nir(frame.nir.height, frame.nir.width, 1, 0.0f);
  return MultiModalFrame(frame.rgb, std::move(nir));
}

struct Reconstruction {
  NormalMap normals;  // encoded01
  DepthMap depth;
};

inline Reconstruction depth_from_estimate(const NormalMap& estimate, float pitch_mm,
                                          float clamp_nz, bool clip_negative) {
  NormalMap unit = decode_normals(estimate);
  GradientField g = gradients_from_normals(unit, pitch_mm, clamp_nz);
  DepthMap depth = fast_poisson(g, clip_negative);
  return {estimate, std::move(depth)};
}

inline Reconstruction reconstruct(const MultiModalFrame& frame, const MultiModalFrame& background,
                                  const MlpWeights& weights, bool relu_before_tanh,
                                  Modality modality, float pitch_mm, float clamp_nz = 0.05f,
                                  bool clip_negative = true) {
  MultiModalFrame f = apply_modality(frame, modality);
  MultiModalFrame b = apply_modality(background, modality);
  NormalMap estimate = forward(weights, f, b, relu_before_tanh);
  return depth_from_estimate(estimate, pitch_mm, clamp_nz, clip_negative);
}

inline Reconstruction reconstruct(const MultiModalFrame& frame, const MultiModalFrame& background,
                                  const LutTable& table, float pitch_mm, float clamp_nz = 0.05f,
                                  bool clip_negative = true) {
  Modality modality = table.channels == 3 ? Modality::Rgb : Modality::RgbNir;
  MultiModalFrame f = apply_modality(frame, modality);
  MultiModalFrame b = apply_modality(background, modality);
  NormalMap estimate = lut_lookup(table, f, b);
  return depth_from_estimate(estimate, pitch_mm, clamp_nz, clip_negative);
}

}  // namespace tactile
