#pragma once

// Dense float32 image tensors and the TSR1 on-disk format.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace tactile {

static_assert(std::endian::native == std::endian::little,
              "TSR1 payloads are little-endian; big-endian hosts are unsupported");

/// I/O and file-format failures (missing files, malformed headers, ...).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_finite(const std::vector<float>& data, const char* what) {
  for (float v : data) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + ": payload contains NaN or Inf");
    }
  }
}

}  // namespace detail

/// Single-channel row-major float32 image.
struct Tensor2D {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor2D() = default;

  Tensor2D(int h, int w, float fill = 0.0f) : height(h), width(w) {
    detail::require(h > 0 && w > 0, "Tensor2D: dimensions must be positive");
    detail::require(std::isfinite(fill), "Tensor2D: fill value must be finite");
    data.assign(static_cast<size_t>(h) * w, fill);
  }

  Tensor2D(int h, int w, std::vector<float> values) : height(h), width(w), data(std::move(values)) {
    detail::require(h > 0 && w > 0, "Tensor2D: dimensions must be positive");
    detail::require(data.size() == static_cast<size_t>(h) * w,
                    "Tensor2D: data length does not match height*width");
    detail::require_finite(data, "Tensor2D");
  }

  float& at(int i, int j) { return data[static_cast<size_t>(i) * width + j]; }
  float at(int i, int j) const { return data[static_cast<size_t>(i) * width + j]; }
  size_t size() const { return data.size(); }
  bool same_shape(const Tensor2D& o) const { return height == o.height && width == o.width; }
};

/// Channel-interleaved row-major float32 image.
struct Tensor3D {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Tensor3D() = default;

  Tensor3D(int h, int w, int c, float fill = 0.0f) : height(h), width(w), channels(c) {
    detail::require(h > 0 && w > 0 && c > 0, "Tensor3D: dimensions must be positive");
    detail::require(std::isfinite(fill), "Tensor3D: fill value must be finite");
    data.assign(static_cast<size_t>(h) * w * c, fill);
  }

  Tensor3D(int h, int w, int c, std::vector<float> values)
      : height(h), width(w), channels(c), data(std::move(values)) {
    detail::require(h > 0 && w > 0 && c > 0, "Tensor3D: dimensions must be positive");
    detail::require(data.size() == static_cast<size_t>(h) * w * c,
                    "Tensor3D: data length does not match height*width*channels");
    detail::require_finite(data, "Tensor3D");
  }

  float& at(int i, int j, int c) {
    return data[(static_cast<size_t>(i) * width + j) * channels + c];
  }
  float at(int i, int j, int c) const {
    return data[(static_cast<size_t>(i) * width + j) * channels + c];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const Tensor3D& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// --- TSR1 file format ---------------------------------------------------
//
// ASCII header line:  TSR1 f32 <ndim> <d0> <d1> [<d2>]\n
// followed by the raw little-endian float32 payload, row-major,
// channel-interleaved. ndim is 2 (height width) or 3 (height width channels).

namespace detail {

inline void write_tsr1(const std::string& path, const std::vector<int>& dims,
                       const std::vector<float>& data) {
  size_t expect = 1;
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("save_tensor: empty or invalid shape");
    expect *= static_cast<size_t>(d);
  }
  if (expect == 0 || data.empty()) throw std::invalid_argument("save_tensor: empty tensor");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_tensor: cannot open '" + path + "' for writing");
  std::string header = "TSR1 f32 " + std::to_string(dims.size());
  for (int d : dims) header += " " + std::to_string(d);
  header += "\n";
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw IoError("save_tensor: write failed for '" + path + "'");
}

struct Tsr1Raw {
  std::vector<int> dims;
  std::vector<float> data;
};

inline Tsr1Raw read_tsr1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_tensor: cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header) || header.size() > 256) {
    throw IoError("load_tensor: malformed header in '" + path + "'");
  }
  char dtype[16];
  int ndim = 0, d0 = 0, d1 = 0, d2 = 0;
  int fields = std::sscanf(header.c_str(), "TSR1 %15s %d %d %d %d", dtype, &ndim, &d0, &d1, &d2);
  if (fields < 4 || std::string(dtype) != "f32" || (ndim != 2 && ndim != 3) ||
      fields != 2 + ndim) {
    throw IoError("load_tensor: malformed header in '" + path + "'");
  }
  Tsr1Raw raw;
  raw.dims = {d0, d1};
  if (ndim == 3) raw.dims.push_back(d2);
  size_t count = 1;
  for (int d : raw.dims) {
    if (d <= 0) throw IoError("load_tensor: non-positive dimension in '" + path + "'");
    count *= static_cast<size_t>(d);
  }
  raw.data.resize(count);
  in.read(reinterpret_cast<char*>(raw.data.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<size_t>(in.gcount()) != count * sizeof(float)) {
    throw IoError("load_tensor: payload shorter than declared shape in '" + path + "'");
  }
  in.peek();
  if (!in.eof()) throw IoError("load_tensor: trailing bytes after payload in '" + path + "'");
  return raw;
}

}  // namespace detail

inline void save_tensor(const Tensor2D& t, const std::string& path) {
  detail::write_tsr1(path, {t.height, t.width}, t.data);
}

inline void save_tensor(const Tensor3D& t, const std::string& path) {
  detail::write_tsr1(path, {t.height, t.width, t.channels}, t.data);
}

inline std::variant<Tensor2D, Tensor3D> load_tensor(const std::string& path) {
  detail::Tsr1Raw raw = detail::read_tsr1(path);
  if (raw.dims.size() == 2) {
    return Tensor2D(raw.dims[0], raw.dims[1], std::move(raw.data));
  }
  return Tensor3D(raw.dims[0], raw.dims[1], raw.dims[2], std::move(raw.data));
}

inline Tensor2D load_tensor2d(const std::string& path) {
  auto t = load_tensor(path);
  if (!std::holds_alternative<Tensor2D>(t)) {
    throw IoError("load_tensor2d: '" + path + "' holds a 3-d tensor");
  }
  return std::get<Tensor2D>(std::move(t));
}

inline Tensor3D load_tensor3d(const std::string& path) {
  auto t = load_tensor(path);
  if (!std::holds_alternative<Tensor3D>(t)) {
    throw IoError("load_tensor3d: '" + path + "' holds a 2-d tensor");
  }
  return std::get<Tensor3D>(std::move(t));
}

}  // namespace tactile
