#pragma once

// Lossy 8/16-bit PNG export for human inspection. The float TSR1 files are
// the authoritative data; these previews quantize.

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <vector>

#include "tactile/types.hpp"

namespace tactile {

namespace detail {

struct PngWriter {
  FILE* file = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  explicit PngWriter(const std::string& path) {
    file = std::fopen(path.c_str(), "wb");
    if (!file) throw IoError("png: cannot open '" + path + "' for writing");
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      cleanup();
      throw IoError("png: libpng initialization failed");
    }
  }

  ~PngWriter() { cleanup(); }

  void cleanup() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (file) std::fclose(file);
    png = nullptr;
    info = nullptr;
    file = nullptr;
  }

  void write(int width, int height, int bit_depth, int color_type,
             const std::vector<png_bytep>& rows, const std::string& path) {
    if (setjmp(png_jmpbuf(png))) throw IoError("png: write failed for '" + path + "'");
    png_init_io(png, file);
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
  }
};

inline unsigned char quantize8(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace detail

/// 8-bit RGB preview of a 3-channel [0,1] tensor.
inline void write_png_rgb8(const Tensor3D& t, const std::string& path) {
  detail::require(t.channels == 3, "write_png_rgb8: expected 3 channels");
  std::vector<unsigned char> pixels(static_cast<size_t>(t.height) * t.width * 3);
  for (int i = 0; i < t.height; ++i) {
    for (int j = 0; j < t.width; ++j) {
      for (int c = 0; c < 3; ++c) {
        pixels[(static_cast<size_t>(i) * t.width + j) * 3 + c] = detail::quantize8(t.at(i, j, c));
      }
    }
  }
  std::vector<png_bytep> rows(t.height);
  for (int i = 0; i < t.height; ++i) rows[i] = pixels.data() + static_cast<size_t>(i) * t.width * 3;
  detail::PngWriter w(path);
  w.write(t.width, t.height, 8, PNG_COLOR_TYPE_RGB, rows, path);
}

/// 8-bit grayscale preview of a [0,1] single-channel tensor.
inline void write_png_gray8(const Tensor2D& t, const std::string& path) {
  std::vector<unsigned char> pixels(static_cast<size_t>(t.height) * t.width);
  for (int i = 0; i < t.height; ++i) {
    for (int j = 0; j < t.width; ++j) {
      pixels[static_cast<size_t>(i) * t.width + j] = detail::quantize8(t.at(i, j));
    }
  }
  std::vector<png_bytep> rows(t.height);
  for (int i = 0; i < t.height; ++i) rows[i] = pixels.data() + static_cast<size_t>(i) * t.width;
  detail::PngWriter w(path);
  w.write(t.width, t.height, 8, PNG_COLOR_TYPE_GRAY, rows, path);
}

/// 16-bit grayscale export with the data scaled by value_scale (big-endian
/// sample order per the PNG spec).
inline void write_png_gray16(const Tensor2D& t, const std::string& path, float value_scale) {
  std::vector<unsigned char> pixels(static_cast<size_t>(t.height) * t.width * 2);
  for (int i = 0; i < t.height; ++i) {
    for (int j = 0; j < t.width; ++j) {
      float scaled = std::clamp(t.at(i, j) * value_scale, 0.0f, 65535.0f);
      auto v = static_cast<uint16_t>(std::lround(scaled));
      size_t k = (static_cast<size_t>(i) * t.width + j) * 2;
      pixels[k] = static_cast<unsigned char>(v >> 8);
      pixels[k + 1] = static_cast<unsigned char>(v & 0xff);
    }
  }
  std::vector<png_bytep> rows(t.height);
  for (int i = 0; i < t.height; ++i) {
    rows[i] = pixels.data() + static_cast<size_t>(i) * t.width * 2;
  }
  detail::PngWriter w(path);
  w.write(t.width, t.height, 16, PNG_COLOR_TYPE_GRAY, rows, path);
}

/// Normal-map preview: encodes to [0,1] if needed, then 8-bit RGB.
inline void write_normal_preview(const NormalMap& n, const std::string& path) {
  if (n.encoding == NormalEncoding::Unit) {
    write_png_rgb8(encode_normals(n).normals, path);
  } else {
    write_png_rgb8(n.normals, path);
  }
}

/// Depth preview normalized to the map's own maximum (flat gray when empty).
inline void write_depth_preview(const DepthMap& d, const std::string& path) {
  float peak = 0.0f;
  for (float v : d.depth.data) peak = std::max(peak, v);
  float scale = peak > 0.0f ? 65535.0f / peak : 0.0f;
  write_png_gray16(d.depth, path, scale);
}

}  // namespace tactile
