#pragma once

// Synthetic stand-in for the physical sensor: presses shape primitives into a
// virtual gel, derives ground-truth normals, and renders aligned RGB+NIR
// frames under four colored side lights plus a coaxial NIR source.

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <variant>
#include <vector>

#include "tactile/types.hpp"

namespace tactile {

/// Gel pad thickness; presses deeper than this are physically invalid.
inline constexpr float kGelThicknessMm = 1.5f;

// --- Press primitives -----------------------------------------------------
//
// Coordinates are pixel positions (converted to mm through the scene pitch),
// radii/depths/periods are millimeters. Each primitive provides an analytic
// indentation profile and the pixel bounding box of its support.

struct SpherePress {
  float radius_mm;
  float depth_mm;
  float cx_px;
  float cy_px;
};

struct CylinderPress {
  float radius_mm;
  float depth_mm;
  float x0_px, y0_px, x1_px, y1_px;
};

struct RidgeGrating {
  float period_mm;
  float amplitude_mm;
  float orientation_rad;
  float cx_px, cy_px;
  float rx_px, ry_px;  // elliptical support region
};

/// Threaded cylinder lying on its side; the helical crests indent the gel as
/// ridges perpendicular to the axis, spaced thread_pitch apart and reaching
/// thread_depth at the crest centers.
struct ThreadedCylinder {
  float radius_mm;
  float thread_pitch_mm;
  float thread_depth_mm;
  float x0_px, y0_px, x1_px, y1_px;
};

using PressPrimitive = std::variant<SpherePress, CylinderPress, RidgeGrating, ThreadedCylinder>;

struct PressScene {
  int width = 160;
  int height = 120;
  float pitch_mm = 0.05f;
  std::vector<PressPrimitive> primitives;
};

namespace detail {

struct BoundsPx {
  float x0, y0, x1, y1;
};

// Spherical cap: indentation max(0, sqrt(R^2 - r^2) - (R - d)).
inline float sphere_indent(const SpherePress& s, float x_mm, float y_mm, float pitch) {
  float dx = x_mm - s.cx_px * pitch;
  float dy = y_mm - s.cy_px * pitch;
  float r2 = dx * dx + dy * dy;
  if (r2 >= s.radius_mm * s.radius_mm) return 0.0f;
  float h = std::sqrt(s.radius_mm * s.radius_mm - r2) - (s.radius_mm - s.depth_mm);
  return std::max(h, 0.0f);
}

inline float sphere_contact_radius(float radius_mm, float depth_mm) {
  float a = radius_mm - depth_mm;
  return std::sqrt(std::max(radius_mm * radius_mm - a * a, 0.0f));
}

inline float segment_distance_mm(float px, float py, float x0, float y0, float x1, float y1,
                                 float pitch, float* along_mm = nullptr) {
  float ax = x0 * pitch, ay = y0 * pitch;
  float bx = x1 * pitch, by = y1 * pitch;
  float vx = bx - ax, vy = by - ay;
  float len2 = vx * vx + vy * vy;
  float t = len2 > 0.0f ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0f;
  float tc = std::clamp(t, 0.0f, 1.0f);
  float dx = px - (ax + tc * vx);
  float dy = py - (ay + tc * vy);
  if (along_mm) *along_mm = t * std::sqrt(len2);
  return std::sqrt(dx * dx + dy * dy);
}

inline float cylinder_indent(const CylinderPress& c, float x_mm, float y_mm, float pitch) {
  float s = segment_distance_mm(x_mm, y_mm, c.x0_px, c.y0_px, c.x1_px, c.y1_px, pitch);
  if (s >= c.radius_mm) return 0.0f;
  float h = std::sqrt(c.radius_mm * c.radius_mm - s * s) - (c.radius_mm - c.depth_mm);
  return std::max(h, 0.0f);
}

inline float grating_indent(const RidgeGrating& g, float x_mm, float y_mm, float pitch) {
  float dx = x_mm - g.cx_px * pitch;
  float dy = y_mm - g.cy_px * pitch;
  float rx = g.rx_px * pitch, ry = g.ry_px * pitch;
  float rho = std::sqrt((dx / rx) * (dx / rx) + (dy / ry) * (dy / ry));
  if (rho >= 1.0f) return 0.0f;
  // Smooth taper keeps the support compact without a rim step.
  float w = 0.5f - 0.5f * std::cos(std::numbers::pi_v<float> * std::min(1.0f, (1.0f - rho) / 0.25f));
  float u = dx * std::cos(g.orientation_rad) + dy * std::sin(g.orientation_rad);
  float ridge = 0.5f + 0.5f * std::cos(2.0f * std::numbers::pi_v<float> * u / g.period_mm);
  return g.amplitude_mm * ridge * w;
}

inline float thread_indent(const ThreadedCylinder& t, float x_mm, float y_mm, float pitch) {
  float along = 0.0f;
  float s = segment_distance_mm(x_mm, y_mm, t.x0_px, t.y0_px, t.x1_px, t.y1_px, pitch, &along);
  if (s >= t.radius_mm) return 0.0f;
  float envelope = std::sqrt(t.radius_mm * t.radius_mm - s * s) -
                   (t.radius_mm - t.thread_depth_mm);
  if (envelope <= 0.0f) return 0.0f;
  float crest = 0.5f + 0.5f * std::cos(2.0f * std::numbers::pi_v<float> * along / t.thread_pitch_mm);
  return envelope * crest;
}

inline float indent(const PressPrimitive& p, float x_mm, float y_mm, float pitch) {
  return std::visit(
      [&](const auto& prim) {
        using T = std::decay_t<decltype(prim)>;
        if constexpr (std::is_same_v<T, SpherePress>) return sphere_indent(prim, x_mm, y_mm, pitch);
        if constexpr (std::is_same_v<T, CylinderPress>)
          return cylinder_indent(prim, x_mm, y_mm, pitch);
        if constexpr (std::is_same_v<T, RidgeGrating>)
          return grating_indent(prim, x_mm, y_mm, pitch);
        if constexpr (std::is_same_v<T, ThreadedCylinder>)
          return thread_indent(prim, x_mm, y_mm, pitch);
      },
      p);
}

inline float peak_depth(const PressPrimitive& p) {
  return std::visit(
      [](const auto& prim) {
        using T = std::decay_t<decltype(prim)>;
        if constexpr (std::is_same_v<T, SpherePress>) return prim.depth_mm;
        if constexpr (std::is_same_v<T, CylinderPress>) return prim.depth_mm;
        if constexpr (std::is_same_v<T, RidgeGrating>) return prim.amplitude_mm;
        if constexpr (std::is_same_v<T, ThreadedCylinder>) return prim.thread_depth_mm;
      },
      p);
}

inline BoundsPx support_bounds(const PressPrimitive& p, float pitch) {
  return std::visit(
      [&](const auto& prim) -> BoundsPx {
        using T = std::decay_t<decltype(prim)>;
        if constexpr (std::is_same_v<T, SpherePress>) {
          float r = sphere_contact_radius(prim.radius_mm, prim.depth_mm) / pitch;
          return {prim.cx_px - r, prim.cy_px - r, prim.cx_px + r, prim.cy_px + r};
        } else if constexpr (std::is_same_v<T, CylinderPress>) {
          float r = sphere_contact_radius(prim.radius_mm, prim.depth_mm) / pitch;
          return {std::min(prim.x0_px, prim.x1_px) - r, std::min(prim.y0_px, prim.y1_px) - r,
                  std::max(prim.x0_px, prim.x1_px) + r, std::max(prim.y0_px, prim.y1_px) + r};
        } else if constexpr (std::is_same_v<T, RidgeGrating>) {
          return {prim.cx_px - prim.rx_px, prim.cy_px - prim.ry_px, prim.cx_px + prim.rx_px,
                  prim.cy_px + prim.ry_px};
        } else {
          float r = sphere_contact_radius(prim.radius_mm, prim.thread_depth_mm) / pitch;
          return {std::min(prim.x0_px, prim.x1_px) - r, std::min(prim.y0_px, prim.y1_px) - r,
                  std::max(prim.x0_px, prim.x1_px) + r, std::max(prim.y0_px, prim.y1_px) + r};
        }
      },
      p);
}

}  // namespace detail

/// Rasterizes the scene into an indentation depth map (max over primitives).
/// Rejects scenes whose contact leaves the image or exceeds the gel thickness.
inline DepthMap depth_from_scene(const PressScene& scene) {
  detail::require(scene.width >= 2 && scene.height >= 2, "depth_from_scene: scene too small");
  detail::require(scene.pitch_mm > 0.0f, "depth_from_scene: pitch must be positive");
  for (const auto& p : scene.primitives) {
    float peak = detail::peak_depth(p);
    if (!(peak >= 0.0f)) throw std::invalid_argument("depth_from_scene: negative press depth");
    if (peak > kGelThicknessMm) {
      throw std::invalid_argument("depth_from_scene: press exceeds the 1.5 mm gel thickness");
    }
    detail::BoundsPx b = detail::support_bounds(p, scene.pitch_mm);
    if (b.x0 < 0.0f || b.y0 < 0.0f || b.x1 > static_cast<float>(scene.width - 1) ||
        b.y1 > static_cast<float>(scene.height - 1)) {
      throw std::invalid_argument("depth_from_scene: primitive support leaves the image");
    }
  }
  Tensor2D depth(scene.height, scene.width, 0.0f);
  for (int i = 0; i < scene.height; ++i) {
    float y_mm = static_cast<float>(i) * scene.pitch_mm;
    for (int j = 0; j < scene.width; ++j) {
      float x_mm = static_cast<float>(j) * scene.pitch_mm;
      float d = 0.0f;
      for (const auto& p : scene.primitives) {
        d = std::max(d, detail::indent(p, x_mm, y_mm, scene.pitch_mm));
      }
      depth.at(i, j) = d;
    }
  }
  return DepthMap(std::move(depth), scene.pitch_mm);
}

/// Ground-truth normals from a depth map: central differences in the interior,
/// one-sided at borders, n = normalize((-dz/dx, -dz/dy, 1)).
inline NormalMap normals_from_depth(const DepthMap& d) {
  const Tensor2D& z = d.depth;
  const float h = d.pitch_mm;
  Tensor3D n(z.height, z.width, 3);
  for (int i = 0; i < z.height; ++i) {
    for (int j = 0; j < z.width; ++j) {
      float gx, gy;
      if (j == 0) {
        gx = (z.at(i, 1) - z.at(i, 0)) / h;
      } else if (j == z.width - 1) {
        gx = (z.at(i, j) - z.at(i, j - 1)) / h;
      } else {
        gx = (z.at(i, j + 1) - z.at(i, j - 1)) / (2.0f * h);
      }
      if (i == 0) {
        gy = (z.at(1, j) - z.at(0, j)) / h;
      } else if (i == z.height - 1) {
        gy = (z.at(i, j) - z.at(i - 1, j)) / h;
      } else {
        gy = (z.at(i + 1, j) - z.at(i - 1, j)) / (2.0f * h);
      }
      double inv = 1.0 / std::sqrt(1.0 + double(gx) * gx + double(gy) * gy);
      n.at(i, j, 0) = static_cast<float>(-gx * inv);
      n.at(i, j, 1) = static_cast<float>(-gy * inv);
      n.at(i, j, 2) = static_cast<float>(inv);
    }
  }
  return NormalMap(std::move(n), NormalEncoding::Unit);
}

// --- Lighting and rendering ------------------------------------------------

struct DirectionalLight {
  std::array<float, 3> direction;  // unit vector from surface toward the light
  std::array<float, 3> color_mix;  // coupling into the R,G,B channels
};

struct LightingConfig {
  std::array<DirectionalLight, 4> rgb_lights;
  std::array<float, 3> nir_direction = {0.0f, 0.0f, 1.0f};
  float nir_intensity = 0.8f;
  std::array<float, 4> ambient = {0.12f, 0.12f, 0.12f, 0.10f};  // R,G,B,NIR floor
  float noise_sigma = 0.01f;
};

inline std::array<float, 3> light_direction(float azimuth_deg, float elevation_deg) {
  float a = azimuth_deg * std::numbers::pi_v<float> / 180.0f;
  float e = elevation_deg * std::numbers::pi_v<float> / 180.0f;
  return {std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e)};
}

/// Red, green, blue and white rows on the four sides at a common elevation,
/// plus the overhead NIR ring averaged to a single near-coaxial source. The
/// ring average sits 15 degrees off the optical axis, tilted toward the side
/// lit only by the dim white row, so the NIR channel keeps a first-order
/// slope response where the RGB coverage is weakest.
inline LightingConfig default_lighting() {
  LightingConfig cfg;
  cfg.rgb_lights[0] = {light_direction(0.0f, 30.0f), {0.65f, 0.0f, 0.0f}};
  cfg.rgb_lights[1] = {light_direction(90.0f, 30.0f), {0.0f, 0.65f, 0.0f}};
  cfg.rgb_lights[2] = {light_direction(180.0f, 30.0f), {0.0f, 0.0f, 0.65f}};
  cfg.rgb_lights[3] = {light_direction(270.0f, 30.0f), {0.06f, 0.06f, 0.06f}};
  cfg.nir_direction = light_direction(270.0f, 75.0f);
  return cfg;
}

namespace detail {

inline void validate_lighting(const LightingConfig& cfg) {
  auto check_unit = [](const std::array<float, 3>& v, const char* what) {
    float n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    require(std::abs(n - 1.0f) <= 1e-4f, std::string(what) + ": direction must be unit-norm");
  };
  for (const auto& l : cfg.rgb_lights) {
    check_unit(l.direction, "LightingConfig");
    for (float m : l.color_mix) require(m >= 0.0f, "LightingConfig: color_mix must be >= 0");
  }
  check_unit(cfg.nir_direction, "LightingConfig");
  require(cfg.nir_intensity >= 0.0f, "LightingConfig: nir intensity must be >= 0");
  for (float a : cfg.ambient) require(a >= 0.0f, "LightingConfig: ambient must be >= 0");
  require(cfg.noise_sigma >= 0.0f, "LightingConfig: noise sigma must be >= 0");
}

/// Seeded Box-Muller gaussian; mt19937 keeps the byte stream identical across
/// platforms (std::normal_distribution does not).
class GaussianNoise {
 public:
  explicit GaussianNoise(uint32_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = (static_cast<double>(rng_()) + 1.0) * (1.0 / 4294967296.0);
    double u2 = static_cast<double>(rng_()) * (1.0 / 4294967296.0);
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline float clamped_lambert(const std::array<float, 3>& dir, float nx, float ny, float nz) {
  return std::max(0.0f, nx * dir[0] + ny * dir[1] + nz * dir[2]);
}

}  // namespace detail

/// Clamped-Lambert render of a unit normal map under the given lighting.
/// Noise draws are consumed in fixed (pixel, R,G,B,NIR) order, so a seed pins
/// the frame bytes exactly.
inline MultiModalFrame render_frame(const NormalMap& normals, const LightingConfig& lighting,
                                    uint32_t seed) {
  detail::require(normals.encoding == NormalEncoding::Unit,
                  "render_frame: normals must be in unit encoding");
  detail::validate_lighting(lighting);
  const Tensor3D& n = normals.normals;
  Tensor3D rgb(n.height, n.width, 3);
  Tensor3D nir(n.height, n.width, 1);
  detail::GaussianNoise noise(seed);
  const bool noisy = lighting.noise_sigma > 0.0f;
  for (int i = 0; i < n.height; ++i) {
    for (int j = 0; j < n.width; ++j) {
      float nx = n.at(i, j, 0), ny = n.at(i, j, 1), nz = n.at(i, j, 2);
      for (int c = 0; c < 3; ++c) {
        float v = lighting.ambient[c];
        for (const auto& l : lighting.rgb_lights) {
          v += l.color_mix[c] * detail::clamped_lambert(l.direction, nx, ny, nz);
        }
        if (noisy) v += lighting.noise_sigma * static_cast<float>(noise.next());
        rgb.at(i, j, c) = std::clamp(v, 0.0f, 1.0f);
      }
      float v = lighting.ambient[3] +
                lighting.nir_intensity * detail::clamped_lambert(lighting.nir_direction, nx, ny, nz);
      if (noisy) v += lighting.noise_sigma * static_cast<float>(noise.next());
      nir.at(i, j, 0) = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return MultiModalFrame(std::move(rgb), std::move(nir));
}

/// Noise-free render of the undeformed gel (flat normals everywhere).
inline MultiModalFrame background_frame(const LightingConfig& lighting, int height, int width) {
  detail::validate_lighting(lighting);
  detail::require(height > 0 && width > 0, "background_frame: invalid size");
  Tensor3D rgb(height, width, 3);
  Tensor3D nir(height, width, 1);
  std::array<float, 4> value;
  for (int c = 0; c < 3; ++c) {
    float v = lighting.ambient[c];
    for (const auto& l : lighting.rgb_lights) {
      v += l.color_mix[c] * detail::clamped_lambert(l.direction, 0.0f, 0.0f, 1.0f);
    }
    value[c] = std::clamp(v, 0.0f, 1.0f);
  }
  value[3] = std::clamp(
      lighting.ambient[3] +
          lighting.nir_intensity * detail::clamped_lambert(lighting.nir_direction, 0.0f, 0.0f, 1.0f),
      0.0f, 1.0f);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      for (int c = 0; c < 3; ++c) rgb.at(i, j, c) = value[c];
      nir.at(i, j, 0) = value[3];
    }
  }
  return MultiModalFrame(std::move(rgb), std::move(nir));
}

}  // namespace tactile
