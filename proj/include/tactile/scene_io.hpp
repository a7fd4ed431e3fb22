#pragma once

// Flat key=value text files describing press scenes and lighting rigs.
// Scene files hold one primitive per line, grouped into named items:
//
//   resolution = 160 120
//   pitch = 0.05
//   item = press0 train
//   sphere = 5.0 0.5 80 60            # radius_mm depth_mm cx_px cy_px
//   item = screw test
//   thread = 2.0 0.8 0.35 30 60 130 60  # radius pitch depth x0 y0 x1 y1

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tactile/gelsim.hpp"

namespace tactile {

struct SceneItem {
  std::string name;
  std::string role;  // train | val | test
  PressScene scene;
};

struct SceneSet {
  std::vector<SceneItem> items;
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// Splits "key = v0 v1 ..." into key and value tokens. Returns false for
/// blank lines and comments.
inline bool split_kv(const std::string& line, std::string& key, std::vector<std::string>& vals) {
  std::string body = line.substr(0, line.find('#'));
  body = trim(body);
  if (body.empty()) return false;
  size_t eq = body.find('=');
  if (eq == std::string::npos) {
    key.clear();
    vals.clear();
    std::istringstream iss(body);
    iss >> key;
    std::string tok;
    while (iss >> tok) vals.push_back(tok);
    return true;
  }
  key = trim(body.substr(0, eq));
  vals.clear();
  std::istringstream iss(body.substr(eq + 1));
  std::string tok;
  while (iss >> tok) vals.push_back(tok);
  return true;
}

inline float parse_float(const std::string& tok, int line_no, const std::string& path) {
  try {
    size_t pos = 0;
    float v = std::stof(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ":" + std::to_string(line_no) + ": expected a number, got '" + tok + "'");
  }
}

inline std::vector<float> parse_floats(const std::vector<std::string>& toks, size_t expected,
                                       int line_no, const std::string& path) {
  if (toks.size() != expected) {
    throw IoError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                  " values, got " + std::to_string(toks.size()));
  }
  std::vector<float> out;
  out.reserve(expected);
  for (const auto& t : toks) out.push_back(parse_float(t, line_no, path));
  return out;
}

}  // namespace detail

inline SceneSet parse_scene_stream(std::istream& in, const std::string& path) {
  SceneSet set;
  int width = 160, height = 120;
  float pitch = 0.05f;
  int line_no = 0;
  std::string line, key;
  std::vector<std::string> vals;
  auto fail = [&](const std::string& msg) {
    throw IoError(path + ":" + std::to_string(line_no) + ": " + msg);
  };
  auto current = [&]() -> PressScene& {
    if (set.items.empty()) fail("primitive before any 'item' line");
    return set.items.back().scene;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::split_kv(line, key, vals)) continue;
    if (key == "resolution") {
      auto v = detail::parse_floats(vals, 2, line_no, path);
      width = static_cast<int>(v[0]);
      height = static_cast<int>(v[1]);
      if (width < 2 || height < 2) fail("resolution must be at least 2x2");
    } else if (key == "pitch") {
      pitch = detail::parse_floats(vals, 1, line_no, path)[0];
      if (!(pitch > 0.0f)) fail("pitch must be positive");
    } else if (key == "item") {
      if (vals.size() != 2) fail("item needs a name and a role (train|val|test)");
      if (vals[1] != "train" && vals[1] != "val" && vals[1] != "test") {
        fail("unknown role '" + vals[1] + "'");
      }
      set.items.push_back({vals[0], vals[1], PressScene{width, height, pitch, {}}});
    } else if (key == "sphere") {
      auto v = detail::parse_floats(vals, 4, line_no, path);
      current().primitives.push_back(SpherePress{v[0], v[1], v[2], v[3]});
    } else if (key == "cylinder") {
      auto v = detail::parse_floats(vals, 6, line_no, path);
      current().primitives.push_back(CylinderPress{v[0], v[1], v[2], v[3], v[4], v[5]});
    } else if (key == "grating") {
      auto v = detail::parse_floats(vals, 7, line_no, path);
      current().primitives.push_back(RidgeGrating{v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
    } else if (key == "thread") {
      auto v = detail::parse_floats(vals, 7, line_no, path);
      current().primitives.push_back(ThreadedCylinder{v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (set.items.empty()) throw IoError(path + ": scene file contains no items");
  return set;
}

inline SceneSet parse_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file '" + path + "'");
  return parse_scene_stream(in, path);
}

inline void write_scene_file(const SceneSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  if (!set.items.empty()) {
    const PressScene& s0 = set.items.front().scene;
    out << "resolution = " << s0.width << " " << s0.height << "\n";
    out << "pitch = " << s0.pitch_mm << "\n";
  }
  for (const auto& item : set.items) {
    out << "item = " << item.name << " " << item.role << "\n";
    for (const auto& p : item.scene.primitives) {
      std::visit(
          [&](const auto& prim) {
            using T = std::decay_t<decltype(prim)>;
            if constexpr (std::is_same_v<T, SpherePress>) {
              out << "sphere = " << prim.radius_mm << " " << prim.depth_mm << " " << prim.cx_px
                  << " " << prim.cy_px << "\n";
            } else if constexpr (std::is_same_v<T, CylinderPress>) {
              out << "cylinder = " << prim.radius_mm << " " << prim.depth_mm << " " << prim.x0_px
                  << " " << prim.y0_px << " " << prim.x1_px << " " << prim.y1_px << "\n";
            } else if constexpr (std::is_same_v<T, RidgeGrating>) {
              out << "grating = " << prim.period_mm << " " << prim.amplitude_mm << " "
                  << prim.orientation_rad << " " << prim.cx_px << " " << prim.cy_px << " "
                  << prim.rx_px << " " << prim.ry_px << "\n";
            } else {
              out << "thread = " << prim.radius_mm << " " << prim.thread_pitch_mm << " "
                  << prim.thread_depth_mm << " " << prim.x0_px << " " << prim.y0_px << " "
                  << prim.x1_px << " " << prim.y1_px << "\n";
            }
          },
          p);
    }
  }
}

// Lighting files: the same key=value syntax. Unset keys keep their defaults.
//
//   elevation_deg = 30
//   azimuths_deg = 0 90 180 270
//   mix0 = 0.65 0 0
//   nir_intensity = 0.8
//   ambient = 0.12 0.12 0.12 0.10
//   noise_sigma = 0.01

inline LightingConfig parse_lighting_stream(std::istream& in, const std::string& path) {
  LightingConfig cfg = default_lighting();
  std::array<float, 4> azimuths = {0.0f, 90.0f, 180.0f, 270.0f};
  float elevation = 30.0f;
  bool geometry_touched = false;
  int line_no = 0;
  std::string line, key;
  std::vector<std::string> vals;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::split_kv(line, key, vals)) continue;
    if (key == "elevation_deg") {
      elevation = detail::parse_floats(vals, 1, line_no, path)[0];
      geometry_touched = true;
    } else if (key == "azimuths_deg") {
      auto v = detail::parse_floats(vals, 4, line_no, path);
      std::copy(v.begin(), v.end(), azimuths.begin());
      geometry_touched = true;
    } else if (key == "mix0" || key == "mix1" || key == "mix2" || key == "mix3") {
      auto v = detail::parse_floats(vals, 3, line_no, path);
      int idx = key[3] - '0';
      std::copy(v.begin(), v.end(), cfg.rgb_lights[idx].color_mix.begin());
    } else if (key == "nir_intensity") {
      cfg.nir_intensity = detail::parse_floats(vals, 1, line_no, path)[0];
    } else if (key == "nir_direction") {
      auto v = detail::parse_floats(vals, 3, line_no, path);
      std::copy(v.begin(), v.end(), cfg.nir_direction.begin());
    } else if (key == "ambient") {
      auto v = detail::parse_floats(vals, 4, line_no, path);
      std::copy(v.begin(), v.end(), cfg.ambient.begin());
    } else if (key == "noise_sigma") {
      cfg.noise_sigma = detail::parse_floats(vals, 1, line_no, path)[0];
    } else {
      throw IoError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (geometry_touched) {
    for (int i = 0; i < 4; ++i) {
      cfg.rgb_lights[i].direction = light_direction(azimuths[i], elevation);
    }
  }
  detail::validate_lighting(cfg);
  return cfg;
}

inline LightingConfig parse_lighting_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lighting file '" + path + "'");
  return parse_lighting_stream(in, path);
}

}  // namespace tactile
