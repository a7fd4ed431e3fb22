#pragma once

// Photometric fusion stereo network: a per-pixel MLP over the 8-channel
// (frame + background) stack, tanh + sphere normalization on the output, and
// L1-supervised training with a from-scratch ADAM optimizer.
//
// The math core is templated on the scalar type; production code runs float,
// the gradient-check tests instantiate double.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tactile/tensor.hpp"
#include "tactile/types.hpp"

namespace tactile {

inline constexpr double kSphereNormEps = 1e-12;

/// tanh(x) / max(||tanh(x)||, eps). When ||tanh(x)|| falls below eps the
/// normalization is degenerate and the zero vector is returned.
template <typename Scalar>
std::array<Scalar, 3> sphere_normalize(const std::array<Scalar, 3>& x) {
  std::array<Scalar, 3> t{std::tanh(x[0]), std::tanh(x[1]), std::tanh(x[2])};
  Scalar r = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
  if (r <= Scalar(kSphereNormEps)) return {Scalar(0), Scalar(0), Scalar(0)};
  return {t[0] / r, t[1] / r, t[2] / r};
}

template <typename Scalar>
struct MlpWeightsT {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  static constexpr int kInput = 8;
  static constexpr int kHidden1 = 128;
  static constexpr int kHidden2 = 64;
  static constexpr int kOutput = 3;

  Mat w1, w2, w3;
  Vec b1, b2, b3;

  static MlpWeightsT zeros() {
    MlpWeightsT w;
    w.w1 = Mat::Zero(kHidden1, kInput);
    w.w2 = Mat::Zero(kHidden2, kHidden1);
    w.w3 = Mat::Zero(kOutput, kHidden2);
    w.b1 = Vec::Zero(kHidden1);
    w.b2 = Vec::Zero(kHidden2);
    w.b3 = Vec::Zero(kOutput);
    return w;
  }

  /// Seeded uniform init in +-sqrt(1/fan_in); biases start at zero.
  static MlpWeightsT init(uint32_t seed) {
    MlpWeightsT w = zeros();
    std::mt19937 rng(seed);
    auto fill = [&rng](Mat& mat) {
      Scalar bound = Scalar(std::sqrt(1.0 / mat.cols()));
      for (Eigen::Index i = 0; i < mat.rows(); ++i) {
        for (Eigen::Index j = 0; j < mat.cols(); ++j) {
          double u = (rng() >> 8) * (1.0 / 16777216.0);  // [0,1)
          mat(i, j) = Scalar(2.0 * u - 1.0) * bound;
        }
      }
    };
    fill(w.w1);
    fill(w.w2);
    fill(w.w3);
    return w;
  }

  bool same_shape(const MlpWeightsT& o) const {
    return w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() && w2.rows() == o.w2.rows() &&
           w2.cols() == o.w2.cols() && w3.rows() == o.w3.rows() && w3.cols() == o.w3.cols() &&
           b1.size() == o.b1.size() && b2.size() == o.b2.size() && b3.size() == o.b3.size();
  }

  template <typename F>
  void for_each_tensor(F&& f) {
    f(w1);
    f(b1);
    f(w2);
    f(b2);
    f(w3);
    f(b3);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    f(w1);
    f(b1);
    f(w2);
    f(b2);
    f(w3);
    f(b3);
  }
};

using MlpWeights = MlpWeightsT<float>;

struct TrainConfig {
  float learning_rate = 0.01f;
  int epochs = 20;
  int batch_size = 64;  // pixels per step
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  uint32_t seed = 0;
  bool relu_before_tanh = false;

  void validate() const {
    detail::require(learning_rate > 0.0f, "TrainConfig: learning_rate must be positive");
    detail::require(epochs >= 0, "TrainConfig: epochs must be >= 0");
    detail::require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  }
};

template <typename Scalar>
struct ForwardCacheT {
  using Mat = typename MlpWeightsT<Scalar>::Mat;
  using Vec = typename MlpWeightsT<Scalar>::Vec;
  Mat z1, a1;   // 128 x B
  Mat z2, a2;   // 64 x B
  Mat z3;       // 3 x B, before the optional layer-7 relu
  Mat x3;       // 3 x B, after it
  Mat t;        // tanh(x3)
  Vec tnorm;    // per-column ||t||
  Mat n;        // sphere-normalized
  Mat enc;      // 0.5 n + 0.5
};

/// Runs the per-pixel MLP on a batch of 8-channel columns.
template <typename Scalar>
void mlp_forward_batch(const MlpWeightsT<Scalar>& w,
                       const typename MlpWeightsT<Scalar>::Mat& x, bool relu_before_tanh,
                       ForwardCacheT<Scalar>& c) {
  c.z1 = (w.w1 * x).colwise() + w.b1;
  c.a1 = c.z1.cwiseMax(Scalar(0));
  c.z2 = (w.w2 * c.a1).colwise() + w.b2;
  c.a2 = c.z2.cwiseMax(Scalar(0));
  c.z3 = (w.w3 * c.a2).colwise() + w.b3;
  c.x3 = relu_before_tanh ? c.z3.cwiseMax(Scalar(0)).eval() : c.z3;
  c.t = c.x3.array().tanh().matrix();
  c.tnorm = c.t.colwise().norm().transpose();
  c.n = c.t;
  for (Eigen::Index col = 0; col < c.t.cols(); ++col) {
    Scalar r = c.tnorm(col);
    if (r <= Scalar(kSphereNormEps)) {
      c.n.col(col).setZero();
    } else {
      c.n.col(col) /= r;
    }
  }
  c.enc = ((c.n * Scalar(0.5)).array() + Scalar(0.5)).matrix();
}

namespace detail {

inline void gather_inputs(const MultiModalFrame& frame, const MultiModalFrame& background,
                          Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>& x) {
  const int height = frame.height(), width = frame.width();
  x.resize(8, static_cast<Eigen::Index>(height) * width);
  Eigen::Index col = 0;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j, ++col) {
      for (int c = 0; c < 4; ++c) {
        x(c, col) = frame.channel(i, j, c);
        x(4 + c, col) = background.channel(i, j, c);
      }
    }
  }
}

}  // namespace detail

/// Full-image forward pass; returns an encoded01 normal map of the same size.
inline NormalMap forward(const MlpWeights& w, const MultiModalFrame& frame,
                         const MultiModalFrame& background, bool relu_before_tanh = false) {
  detail::require(frame.height() == background.height() && frame.width() == background.width(),
                  "forward: frame and background must share shape");
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> x;
  detail::gather_inputs(frame, background, x);
  ForwardCacheT<float> cache;
  mlp_forward_batch(w, x, relu_before_tanh, cache);
  Tensor3D out(frame.height(), frame.width(), 3);
  Eigen::Index col = 0;
  for (int i = 0; i < frame.height(); ++i) {
    for (int j = 0; j < frame.width(); ++j, ++col) {
      for (int c = 0; c < 3; ++c) {
        out.at(i, j, c) = std::clamp(cache.enc(c, col), 0.0f, 1.0f);
      }
    }
  }
  return NormalMap(std::move(out), NormalEncoding::Encoded01);
}

/// Mean absolute difference over masked pixels and channels. Both maps must be
/// encoded01; a null mask selects every pixel.
inline double l1_loss(const NormalMap& pred, const NormalMap& target,
                      const Tensor2D* mask = nullptr) {
  detail::require(pred.encoding == NormalEncoding::Encoded01 &&
                      target.encoding == NormalEncoding::Encoded01,
                  "l1_loss: inputs must be encoded01");
  detail::require(pred.normals.same_shape(target.normals), "l1_loss: shape mismatch");
  if (mask) {
    detail::require(mask->height == pred.height() && mask->width == pred.width(),
                    "l1_loss: mask shape mismatch");
  }
  double sum = 0.0;
  int64_t count = 0;
  for (int i = 0; i < pred.height(); ++i) {
    for (int j = 0; j < pred.width(); ++j) {
      if (mask && mask->at(i, j) == 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        sum += std::abs(double(pred.normals.at(i, j, c)) - double(target.normals.at(i, j, c)));
      }
      ++count;
    }
  }
  detail::require(count > 0, "l1_loss: empty mask");
  return sum / (3.0 * static_cast<double>(count));
}

/// Analytic gradients of mean-L1(forward(x), target) with respect to every
/// parameter. Subgradient 0 at ReLU and L1 kinks; the epsilon branch of the
/// sphere normalization is treated as constant. Returns the batch loss.
template <typename Scalar>
Scalar mlp_backward_batch(const MlpWeightsT<Scalar>& w,
                          const typename MlpWeightsT<Scalar>::Mat& x,
                          const typename MlpWeightsT<Scalar>::Mat& target_enc,
                          bool relu_before_tanh, MlpWeightsT<Scalar>& grads,
                          ForwardCacheT<Scalar>* cache_out = nullptr) {
  using Mat = typename MlpWeightsT<Scalar>::Mat;
  const Eigen::Index batch = x.cols();
  detail::require(batch > 0, "backward: batch must be nonempty");
  detail::require(target_enc.cols() == batch && target_enc.rows() == 3,
                  "backward: target shape mismatch");

  ForwardCacheT<Scalar> local;
  ForwardCacheT<Scalar>& c = cache_out ? *cache_out : local;
  mlp_forward_batch(w, x, relu_before_tanh, c);

  Mat diff = c.enc - target_enc;
  Scalar loss = diff.array().abs().sum() / Scalar(3 * batch);

  // d(mean |diff|)/d(enc), then through enc = 0.5 n + 0.5.
  Mat dn = diff.array().sign().matrix() * (Scalar(0.5) / Scalar(3 * batch));

  // Through n = t / ||t||: dt = (dn - n (n . dn)) / ||t||; zero on the
  // epsilon branch.
  Mat dt(3, batch);
  for (Eigen::Index col = 0; col < batch; ++col) {
    Scalar r = c.tnorm(col);
    if (r <= Scalar(kSphereNormEps)) {
      dt.col(col).setZero();
    } else {
      Scalar proj = c.n.col(col).dot(dn.col(col));
      dt.col(col) = (dn.col(col) - c.n.col(col) * proj) / r;
    }
  }

  Mat dx3 = (dt.array() * (Scalar(1) - c.t.array().square())).matrix();
  Mat dz3 = relu_before_tanh
                ? (dx3.array() * (c.z3.array() > Scalar(0)).template cast<Scalar>()).matrix()
                : dx3;

  grads.w3 = dz3 * c.a2.transpose();
  grads.b3 = dz3.rowwise().sum();
  Mat da2 = w.w3.transpose() * dz3;
  Mat dz2 = (da2.array() * (c.z2.array() > Scalar(0)).template cast<Scalar>()).matrix();
  grads.w2 = dz2 * c.a1.transpose();
  grads.b2 = dz2.rowwise().sum();
  Mat da1 = w.w2.transpose() * dz2;
  Mat dz1 = (da1.array() * (c.z1.array() > Scalar(0)).template cast<Scalar>()).matrix();
  grads.w1 = dz1 * x.transpose();
  grads.b1 = dz1.rowwise().sum();
  return loss;
}

template <typename Scalar>
struct AdamStateT {
  MlpWeightsT<Scalar> m = MlpWeightsT<Scalar>::zeros();
  MlpWeightsT<Scalar> v = MlpWeightsT<Scalar>::zeros();
  int64_t step = 0;
};

/// One ADAM update with bias correction.
template <typename Scalar>
void adam_step(MlpWeightsT<Scalar>& w, AdamStateT<Scalar>& state,
               const MlpWeightsT<Scalar>& grads, const TrainConfig& cfg) {
  detail::require(w.same_shape(grads), "adam_step: gradient shape mismatch");
  state.step += 1;
  const Scalar b1 = Scalar(cfg.beta1), b2 = Scalar(cfg.beta2);
  const Scalar corr1 = Scalar(1) - Scalar(std::pow(double(cfg.beta1), double(state.step)));
  const Scalar corr2 = Scalar(1) - Scalar(std::pow(double(cfg.beta2), double(state.step)));
  const Scalar lr = Scalar(cfg.learning_rate);
  const Scalar eps = Scalar(cfg.adam_eps);

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = (b2 * v.array() + (Scalar(1) - b2) * g.array().square()).matrix();
    auto m_hat = m.array() / corr1;
    auto v_hat = v.array() / corr2;
    param = (param.array() - lr * m_hat / (v_hat.sqrt() + eps)).matrix();
  };
  update(w.w1, state.m.w1, state.v.w1, grads.w1);
  update(w.b1, state.m.b1, state.v.b1, grads.b1);
  update(w.w2, state.m.w2, state.v.w2, grads.w2);
  update(w.b2, state.m.b2, state.v.b2, grads.b2);
  update(w.w3, state.m.w3, state.v.w3, grads.w3);
  update(w.b3, state.m.b3, state.v.b3, grads.b3);
}

struct EpochRecord {
  int epoch;
  double train_l1;
  double val_l1;
};

struct TrainState {
  MlpWeights weights;
  AdamStateT<float> adam;
  std::vector<EpochRecord> history;
};

/// One supervised image: frame + background inputs, encoded01 normal targets.
struct TrainSample {
  const MultiModalFrame* frame;
  const MultiModalFrame* background;
  const NormalMap* target;
};

namespace detail {

inline void gather_samples(std::span<const TrainSample> items,
                           Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>& x,
                           Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>& target) {
  Eigen::Index total = 0;
  for (const auto& s : items) {
    require(s.target->encoding == NormalEncoding::Encoded01,
            "train: targets must be encoded01");
    require(s.frame->height() == s.target->height() && s.frame->width() == s.target->width(),
            "train: frame/target shape mismatch");
    require(s.frame->height() == s.background->height() &&
                s.frame->width() == s.background->width(),
            "train: frame/background shape mismatch");
    total += static_cast<Eigen::Index>(s.frame->height()) * s.frame->width();
  }
  x.resize(8, total);
  target.resize(3, total);
  Eigen::Index col = 0;
  for (const auto& s : items) {
    for (int i = 0; i < s.frame->height(); ++i) {
      for (int j = 0; j < s.frame->width(); ++j, ++col) {
        for (int c = 0; c < 4; ++c) {
          x(c, col) = s.frame->channel(i, j, c);
          x(4 + c, col) = s.background->channel(i, j, c);
        }
        for (int c = 0; c < 3; ++c) target(c, col) = s.target->normals.at(i, j, c);
      }
    }
  }
}

/// Mean L1 over every pixel of the sample matrix, evaluated in chunks.
inline double full_pass_l1(const MlpWeights& w,
                           const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>& x,
                           const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>& target,
                           bool relu_before_tanh) {
  constexpr Eigen::Index kChunk = 16384;
  double sum = 0.0;
  ForwardCacheT<float> cache;
  for (Eigen::Index start = 0; start < x.cols(); start += kChunk) {
    Eigen::Index n = std::min(kChunk, x.cols() - start);
    mlp_forward_batch<float>(w, x.middleCols(start, n), relu_before_tanh, cache);
    sum += (cache.enc - target.middleCols(start, n)).array().abs().sum();
  }
  return sum / (3.0 * static_cast<double>(x.cols()));
}

/// Fisher-Yates with explicit index mapping; std::shuffle's draw sequence is
/// implementation-defined, this is not.
inline void deterministic_shuffle(std::vector<int64_t>& v, std::mt19937& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace detail

/// Seeded training over uniformly shuffled pixel batches. Epoch 0 records the
/// initial full-pass losses; each later record holds the mean step loss and a
/// full validation pass. Single-threaded and bit-reproducible per seed.
inline TrainState train(std::span<const TrainSample> train_items,
                        std::span<const TrainSample> val_items, const TrainConfig& cfg) {
  cfg.validate();
  detail::require(!train_items.empty(), "train: empty dataset");

  TrainState state;
  state.weights = MlpWeights::init(cfg.seed);
  if (cfg.epochs == 0) return state;

  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> x, target, xval, tval;
  detail::gather_samples(train_items, x, target);
  if (!val_items.empty()) detail::gather_samples(val_items, xval, tval);

  auto val_l1 = [&]() {
    return val_items.empty()
               ? 0.0
               : detail::full_pass_l1(state.weights, xval, tval, cfg.relu_before_tanh);
  };
  state.history.push_back(
      {0, detail::full_pass_l1(state.weights, x, target, cfg.relu_before_tanh), val_l1()});

  const int64_t total = x.cols();
  const int64_t steps = total / cfg.batch_size;
  detail::require(steps > 0, "train: batch size exceeds the pixel count");

  std::vector<int64_t> order(total);
  for (int64_t i = 0; i < total; ++i) order[i] = i;
  std::mt19937 shuffle_rng(cfg.seed * 0x9E3779B9u + 1u);

  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> xb(8, cfg.batch_size);
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> tb(3, cfg.batch_size);
  MlpWeights grads = MlpWeights::zeros();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    detail::deterministic_shuffle(order, shuffle_rng);
    double loss_sum = 0.0;
    for (int64_t s = 0; s < steps; ++s) {
      for (int b = 0; b < cfg.batch_size; ++b) {
        int64_t idx = order[s * cfg.batch_size + b];
        xb.col(b) = x.col(idx);
        tb.col(b) = target.col(idx);
      }
      loss_sum += mlp_backward_batch<float>(state.weights, xb, tb, cfg.relu_before_tanh, grads);
      adam_step(state.weights, state.adam, grads, cfg);
    }
    state.history.push_back({epoch, loss_sum / static_cast<double>(steps), val_l1()});
  }
  return state;
}

// --- Persistence ------------------------------------------------------------

inline void write_loss_csv(const std::vector<EpochRecord>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_loss_csv: cannot open '" + path + "'");
  out << "epoch,train_l1,val_l1\n";
  char line[96];
  for (const auto& r : history) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g\n", r.epoch, r.train_l1, r.val_l1);
    out << line;
  }
}

struct LoadedMlp {
  MlpWeights weights;
  bool relu_before_tanh = false;
  std::string modality;  // "rgb" or "rgb+nir"
};

namespace detail {

inline Tensor2D to_tensor(const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>& m) {
  Tensor2D t(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.at(int(i), int(j)) = m(i, j);
  }
  return t;
}

inline Tensor2D to_tensor(const Eigen::Matrix<float, Eigen::Dynamic, 1>& v) {
  Tensor2D t(1, static_cast<int>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) t.at(0, int(i)) = v(i);
  return t;
}

}  // namespace detail

/// Writes the weight tensors plus a manifest recording the layer shapes, the
/// layer-7 relu flag and the input modality the weights were trained for.
inline void save_mlp(const MlpWeights& w, bool relu_before_tanh, const std::string& modality,
                     const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_tensor(detail::to_tensor(w.w1), dir + "/layer1_weight.tsr");
  save_tensor(detail::to_tensor(w.b1), dir + "/layer1_bias.tsr");
  save_tensor(detail::to_tensor(w.w2), dir + "/layer2_weight.tsr");
  save_tensor(detail::to_tensor(w.b2), dir + "/layer2_bias.tsr");
  save_tensor(detail::to_tensor(w.w3), dir + "/layer3_weight.tsr");
  save_tensor(detail::to_tensor(w.b3), dir + "/layer3_bias.tsr");
  std::ofstream out(dir + "/manifest.txt");
  if (!out) throw IoError("save_mlp: cannot open manifest in '" + dir + "'");
  out << "layers = 8 128 64 3\n";
  out << "relu_before_tanh = " << (relu_before_tanh ? 1 : 0) << "\n";
  out << "modality = " << modality << "\n";
}

inline LoadedMlp load_mlp(const std::string& dir) {
  std::ifstream in(dir + "/manifest.txt");
  if (!in) throw IoError("load_mlp: cannot open manifest in '" + dir + "'");
  LoadedMlp loaded;
  std::string line;
  std::array<int, 4> layers = {0, 0, 0, 0};
  while (std::getline(in, line)) {
    std::istringstream iss(line);
    std::string key, eq;
    iss >> key >> eq;
    if (key == "layers") {
      iss >> layers[0] >> layers[1] >> layers[2] >> layers[3];
    } else if (key == "relu_before_tanh") {
      int v = 0;
      iss >> v;
      loaded.relu_before_tanh = v != 0;
    } else if (key == "modality") {
      iss >> loaded.modality;
    }
  }
  if (layers != std::array<int, 4>{8, 128, 64, 3}) {
    throw IoError("load_mlp: manifest layer shapes do not match the 8-128-64-3 architecture");
  }
  if (loaded.modality != "rgb" && loaded.modality != "rgb+nir") {
    throw IoError("load_mlp: manifest modality must be 'rgb' or 'rgb+nir'");
  }
  auto load_mat = [&](const std::string& name, int rows, int cols) {
    Tensor2D t = load_tensor2d(dir + "/" + name);
    if (t.height != rows || t.width != cols) {
      throw IoError("load_mlp: '" + name + "' has unexpected shape");
    }
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) m(i, j) = t.at(i, j);
    }
    return m;
  };
  loaded.weights.w1 = load_mat("layer1_weight.tsr", 128, 8);
  loaded.weights.w2 = load_mat("layer2_weight.tsr", 64, 128);
  loaded.weights.w3 = load_mat("layer3_weight.tsr", 3, 64);
  loaded.weights.b1 = load_mat("layer1_bias.tsr", 1, 128).transpose().col(0);
  loaded.weights.b2 = load_mat("layer2_bias.tsr", 1, 64).transpose().col(0);
  loaded.weights.b3 = load_mat("layer3_bias.tsr", 1, 3).transpose().col(0);
  return loaded;
}

}  // namespace tactile
