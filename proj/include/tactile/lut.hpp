#pragma once

// Look-up-table baseline: quantizes background-subtracted pixel intensities
// (RGB or RGB+NIR) and maps each bin to the mean surface gradient observed in
// calibration presses. Unseen keys fall back to the nearest occupied bin.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "tactile/tensor.hpp"
#include "tactile/types.hpp"

namespace tactile {

/// Gradients steeper than this nz cutoff are excluded from the build;
/// gx = -nx/nz blows up near the contact rim.
inline constexpr float kLutSlopeCutoffNz = 0.05f;

struct LutTable {
  int bins_per_channel = 32;
  int channels = 4;  // 3 = RGB only, 4 = RGB+NIR
  bool background_subtracted = true;
  std::vector<float> mean_gx;
  std::vector<float> mean_gy;
  std::vector<int32_t> count;

  int64_t bin_count() const {
    int64_t n = 1;
    for (int c = 0; c < channels; ++c) n *= bins_per_channel;
    return n;
  }

  bool empty() const {
    for (int32_t c : count) {
      if (c > 0) return false;
    }
    return true;
  }
};

namespace detail {

inline int quantize_channel(float delta, int bins) {
  // Background-subtracted intensities live in [-1,1]; shift to [0,1].
  float q = std::clamp((delta + 1.0f) * 0.5f, 0.0f, 1.0f);
  return std::min(bins - 1, static_cast<int>(q * static_cast<float>(bins)));
}

inline int64_t lut_key(const MultiModalFrame& frame, const MultiModalFrame& background, int i,
                       int j, int channels, int bins) {
  int64_t key = 0;
  for (int c = 0; c < channels; ++c) {
    float delta = frame.channel(i, j, c) - background.channel(i, j, c);
    key = key * bins + quantize_channel(delta, bins);
  }
  return key;
}

inline void unpack_key(int64_t key, int channels, int bins, int* coords) {
  for (int c = channels - 1; c >= 0; --c) {
    coords[c] = static_cast<int>(key % bins);
    key /= bins;
  }
}

}  // namespace detail

struct LutSample {
  const MultiModalFrame* frame;
  const MultiModalFrame* background;
  const NormalMap* gt;  // unit encoding
};

/// Accumulates per-bin mean gradients from calibration presses.
inline LutTable build_lut(std::span<const LutSample> samples, int channels, int bins = 32) {
  detail::require(channels == 3 || channels == 4, "build_lut: channels must be 3 or 4");
  detail::require(bins >= 2 && bins <= 64, "build_lut: bins_per_channel out of range");
  detail::require(!samples.empty(), "build_lut: need at least one sample");

  LutTable table;
  table.bins_per_channel = bins;
  table.channels = channels;
  const int64_t total = table.bin_count();
  std::vector<double> sum_gx(total, 0.0), sum_gy(total, 0.0);
  table.count.assign(total, 0);

  for (const auto& s : samples) {
    detail::require(s.gt->encoding == NormalEncoding::Unit, "build_lut: gt must be unit-encoded");
    detail::require(s.frame->height() == s.gt->height() && s.frame->width() == s.gt->width(),
                    "build_lut: frame/gt shape mismatch");
    for (int i = 0; i < s.frame->height(); ++i) {
      for (int j = 0; j < s.frame->width(); ++j) {
        float nz = s.gt->normals.at(i, j, 2);
        if (nz <= kLutSlopeCutoffNz) continue;
        int64_t key = detail::lut_key(*s.frame, *s.background, i, j, channels, bins);
        sum_gx[key] += -double(s.gt->normals.at(i, j, 0)) / nz;
        sum_gy[key] += -double(s.gt->normals.at(i, j, 1)) / nz;
        table.count[key] += 1;
      }
    }
  }

  table.mean_gx.assign(total, 0.0f);
  table.mean_gy.assign(total, 0.0f);
  for (int64_t k = 0; k < total; ++k) {
    if (table.count[k] > 0) {
      table.mean_gx[k] = static_cast<float>(sum_gx[k] / table.count[k]);
      table.mean_gy[k] = static_cast<float>(sum_gy[k] / table.count[k]);
    }
  }
  return table;
}

/// Per-pixel gradient lookup converted back to encoded01 normals. Misses
/// resolve to the nearest occupied bin (Euclidean distance over bin centers),
/// memoized per distinct missing key.
inline NormalMap lut_lookup(const LutTable& table, const MultiModalFrame& frame,
                            const MultiModalFrame& background) {
  detail::require(table.channels == 3 || table.channels == 4, "lut_lookup: invalid table");
  detail::require(!table.empty(), "lut_lookup: empty table");
  detail::require(frame.height() == background.height() && frame.width() == background.width(),
                  "lut_lookup: frame and background must share shape");

  std::vector<int64_t> occupied;
  for (int64_t k = 0; k < table.bin_count(); ++k) {
    if (table.count[k] > 0) occupied.push_back(k);
  }
  std::vector<int> occ_coords(occupied.size() * table.channels);
  for (size_t o = 0; o < occupied.size(); ++o) {
    detail::unpack_key(occupied[o], table.channels, table.bins_per_channel,
                       occ_coords.data() + o * table.channels);
  }
  std::unordered_map<int64_t, int64_t> miss_cache;
  std::vector<int> coords(table.channels);

  auto resolve = [&](int64_t key) -> int64_t {
    if (table.count[key] > 0) return key;
    auto it = miss_cache.find(key);
    if (it != miss_cache.end()) return it->second;
    detail::unpack_key(key, table.channels, table.bins_per_channel, coords.data());
    int64_t best = occupied.front();
    int64_t best_d2 = std::numeric_limits<int64_t>::max();
    for (size_t o = 0; o < occupied.size(); ++o) {
      int64_t d2 = 0;
      const int* oc = occ_coords.data() + o * table.channels;
      for (int c = 0; c < table.channels; ++c) {
        int64_t d = coords[c] - oc[c];
        d2 += d * d;
      }
      if (d2 < best_d2) {
        best_d2 = d2;
        best = occupied[o];
      }
    }
    miss_cache.emplace(key, best);
    return best;
  };

  Tensor3D out(frame.height(), frame.width(), 3);
  for (int i = 0; i < frame.height(); ++i) {
    for (int j = 0; j < frame.width(); ++j) {
      int64_t key = resolve(detail::lut_key(frame, background, i, j, table.channels,
                                            table.bins_per_channel));
      double gx = table.mean_gx[key];
      double gy = table.mean_gy[key];
      double inv = 1.0 / std::sqrt(1.0 + gx * gx + gy * gy);
      out.at(i, j, 0) = static_cast<float>(std::clamp(0.5 * (-gx * inv) + 0.5, 0.0, 1.0));
      out.at(i, j, 1) = static_cast<float>(std::clamp(0.5 * (-gy * inv) + 0.5, 0.0, 1.0));
      out.at(i, j, 2) = static_cast<float>(std::clamp(0.5 * inv + 0.5, 0.0, 1.0));
    }
  }
  return NormalMap(std::move(out), NormalEncoding::Encoded01);
}

// --- Persistence: one table tensor (gx, gy, count per bin) + manifest. ------

inline void save_lut(const LutTable& table, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const int64_t total = table.bin_count();
  Tensor2D t(static_cast<int>(total), 3);
  for (int64_t k = 0; k < total; ++k) {
    t.at(static_cast<int>(k), 0) = table.mean_gx[k];
    t.at(static_cast<int>(k), 1) = table.mean_gy[k];
    t.at(static_cast<int>(k), 2) = static_cast<float>(table.count[k]);
  }
  save_tensor(t, dir + "/table.tsr");
  std::ofstream out(dir + "/manifest.txt");
  if (!out) throw IoError("save_lut: cannot open manifest in '" + dir + "'");
  out << "bins_per_channel = " << table.bins_per_channel << "\n";
  out << "channels = " << table.channels << "\n";
  out << "background_subtracted = " << (table.background_subtracted ? 1 : 0) << "\n";
}

inline LutTable load_lut(const std::string& dir) {
  std::ifstream in(dir + "/manifest.txt");
  if (!in) throw IoError("load_lut: cannot open manifest in '" + dir + "'");
  LutTable table;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream iss(line);
    std::string key, eq;
    int value = 0;
    if (iss >> key >> eq >> value) {
      if (key == "bins_per_channel") table.bins_per_channel = value;
      if (key == "channels") table.channels = value;
      if (key == "background_subtracted") table.background_subtracted = value != 0;
    }
  }
  if ((table.channels != 3 && table.channels != 4) || table.bins_per_channel < 2 ||
      table.bins_per_channel > 64) {
    throw IoError("load_lut: manifest holds an invalid table description");
  }
  Tensor2D t = load_tensor2d(dir + "/table.tsr");
  if (t.height != table.bin_count() || t.width != 3) {
    throw IoError("load_lut: table tensor shape does not match the manifest");
  }
  const int64_t total = table.bin_count();
  table.mean_gx.resize(total);
  table.mean_gy.resize(total);
  table.count.resize(total);
  for (int64_t k = 0; k < total; ++k) {
    table.mean_gx[k] = t.at(static_cast<int>(k), 0);
    table.mean_gy[k] = t.at(static_cast<int>(k), 1);
    table.count[k] = static_cast<int32_t>(t.at(static_cast<int>(k), 2));
  }
  return table;
}

}  // namespace tactile
