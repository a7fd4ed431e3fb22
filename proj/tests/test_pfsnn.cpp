#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/test_util.hpp"
#include "tactile/gelsim.hpp"
#include "tactile/pfsnn.hpp"

using namespace tactile;

TEST(SphereNormalize, ZeroInputTakesEpsilonBranch) {
  auto n = sphere_normalize<float>({0.0f, 0.0f, 0.0f});
  EXPECT_EQ(n[0], 0.0f);
  EXPECT_EQ(n[1], 0.0f);
  EXPECT_EQ(n[2], 0.0f);
}

TEST(SphereNormalize, SaturatedAxis) {
  auto n = sphere_normalize<float>({0.0f, 0.0f, 10.0f});
  EXPECT_NEAR(n[0], 0.0f, 1e-7f);
  EXPECT_NEAR(n[1], 0.0f, 1e-7f);
  EXPECT_NEAR(n[2], 1.0f, 1e-6f);
}

TEST(SphereNormalize, EqualComponentsGiveUnitDiagonal) {
  auto n = sphere_normalize<float>({1.0f, 1.0f, 1.0f});
  const float d = 1.0f / std::sqrt(3.0f);
  EXPECT_NEAR(n[0], d, 1e-6f);
  EXPECT_NEAR(n[1], d, 1e-6f);
  EXPECT_NEAR(n[2], d, 1e-6f);
}

TEST(SphereNormalize, TinyInputsReturnZeroVector) {
  auto n = sphere_normalize<double>({1e-13, -2e-13, 5e-14});
  EXPECT_EQ(n[0], 0.0);
  EXPECT_EQ(n[1], 0.0);
  EXPECT_EQ(n[2], 0.0);
}

namespace {

MultiModalFrame constant_frame(int h, int w, float r, float g, float b, float nir) {
  Tensor3D rgb(h, w, 3);
  Tensor3D ni(h, w, 1, nir);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      rgb.at(i, j, 0) = r;
      rgb.at(i, j, 1) = g;
      rgb.at(i, j, 2) = b;
    }
  }
  return MultiModalFrame(std::move(rgb), std::move(ni));
}

MultiModalFrame random_frame(int h, int w, uint32_t seed) {
  std::mt19937 rng(seed);
  auto u = [&rng]() { return float((rng() >> 8) * (1.0 / 16777216.0)); };
  Tensor3D rgb(h, w, 3);
  Tensor3D nir(h, w, 1);
  for (auto& v : rgb.data) v = u();
  for (auto& v : nir.data) v = u();
  return MultiModalFrame(std::move(rgb), std::move(nir));
}

}  // namespace

TEST(Forward, ZeroWeightsGiveMidGray) {
  MlpWeights w = MlpWeights::zeros();
  MultiModalFrame frame = random_frame(6, 8, 1);
  MultiModalFrame bg = constant_frame(6, 8, 0.4f, 0.4f, 0.4f, 0.9f);
  NormalMap out = forward(w, frame, bg);
  ASSERT_EQ(out.encoding, NormalEncoding::Encoded01);
  for (float v : out.normals.data) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Forward, ConstantInputGivesConstantOutput) {
  MlpWeights w = MlpWeights::init(3);
  MultiModalFrame frame = constant_frame(5, 7, 0.3f, 0.6f, 0.2f, 0.8f);
  MultiModalFrame bg = constant_frame(5, 7, 0.4f, 0.4f, 0.4f, 0.9f);
  NormalMap out = forward(w, frame, bg);
  for (int c = 0; c < 3; ++c) {
    float v = out.normals.at(0, 0, c);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 7; ++j) EXPECT_FLOAT_EQ(out.normals.at(i, j, c), v);
    }
  }
}

TEST(Forward, ZeroingNirChangesOutput) {
  MlpWeights w = MlpWeights::init(11);
  MultiModalFrame frame = random_frame(8, 8, 2);
  MultiModalFrame bg = constant_frame(8, 8, 0.4f, 0.4f, 0.4f, 0.9f);
  NormalMap with_nir = forward(w, frame, bg);
  Tensor3D zero_nir(8, 8, 1, 0.0f);
  MultiModalFrame frame_rgb(frame.rgb, zero_nir);
  MultiModalFrame bg_rgb(bg.rgb, Tensor3D(8, 8, 1, 0.0f));
  NormalMap without_nir = forward(w, frame_rgb, bg_rgb);
  EXPECT_NE(with_nir.normals.data, without_nir.normals.data);
}

TEST(Forward, DecodedOutputsAreUnitNorm) {
  MlpWeights w = MlpWeights::init(5);
  MultiModalFrame frame = random_frame(16, 16, 7);
  MultiModalFrame bg = constant_frame(16, 16, 0.4f, 0.4f, 0.4f, 0.9f);
  for (bool relu_flag : {false, true}) {
    NormalMap unit = decode_normals(forward(w, frame, bg, relu_flag));
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 16; ++j) {
        double n = 0.0;
        for (int c = 0; c < 3; ++c) {
          n += double(unit.normals.at(i, j, c)) * unit.normals.at(i, j, c);
        }
        n = std::sqrt(n);
        EXPECT_TRUE(n <= 1e-6 || std::abs(n - 1.0) <= 1e-6) << "norm " << n;
      }
    }
  }
}

TEST(Forward, EquivariantToPixelPermutation) {
  MlpWeights w = MlpWeights::init(9);
  MultiModalFrame frame = random_frame(4, 6, 21);
  MultiModalFrame bg = random_frame(4, 6, 22);
  NormalMap base = forward(w, frame, bg);

  // Swap two pixel positions in both inputs; outputs must swap identically.
  auto swap_px = [](Tensor3D& t, int i0, int j0, int i1, int j1) {
    for (int c = 0; c < t.channels; ++c) std::swap(t.at(i0, j0, c), t.at(i1, j1, c));
  };
  Tensor3D rgb = frame.rgb, nir = frame.nir, brgb = bg.rgb, bnir = bg.nir;
  swap_px(rgb, 0, 0, 3, 5);
  swap_px(nir, 0, 0, 3, 5);
  swap_px(brgb, 0, 0, 3, 5);
  swap_px(bnir, 0, 0, 3, 5);
  NormalMap permuted = forward(w, MultiModalFrame(rgb, nir), MultiModalFrame(brgb, bnir));
  for (int c = 0; c < 3; ++c) {
    EXPECT_FLOAT_EQ(permuted.normals.at(0, 0, c), base.normals.at(3, 5, c));
    EXPECT_FLOAT_EQ(permuted.normals.at(3, 5, c), base.normals.at(0, 0, c));
  }
}

TEST(Forward, ShapeMismatchRejected) {
  MlpWeights w = MlpWeights::init(1);
  MultiModalFrame frame = random_frame(4, 4, 1);
  MultiModalFrame bg = random_frame(4, 5, 1);
  EXPECT_THROW(forward(w, frame, bg), std::invalid_argument);
}

TEST(L1Loss, KnownValues) {
  Tensor3D a(2, 2, 3, 0.25f);
  Tensor3D b(2, 2, 3, 0.75f);
  NormalMap pa(a, NormalEncoding::Encoded01), pb(b, NormalEncoding::Encoded01);
  EXPECT_DOUBLE_EQ(l1_loss(pa, pa), 0.0);
  EXPECT_NEAR(l1_loss(pa, pb), 0.5, 1e-12);
}

TEST(L1Loss, InvariantToPixelPermutation) {
  std::mt19937 rng(31);
  auto u = [&rng]() { return float((rng() >> 8) * (1.0 / 16777216.0)); };
  Tensor3D a(1, 8, 3), b(1, 8, 3), ap(1, 8, 3), bp(1, 8, 3);
  for (int k = 0; k < 8; ++k) {
    for (int c = 0; c < 3; ++c) {
      a.at(0, k, c) = u();
      b.at(0, k, c) = u();
    }
  }
  for (int k = 0; k < 8; ++k) {
    for (int c = 0; c < 3; ++c) {
      ap.at(0, k, c) = a.at(0, 7 - k, c);
      bp.at(0, k, c) = b.at(0, 7 - k, c);
    }
  }
  double l0 = l1_loss(NormalMap(a, NormalEncoding::Encoded01), NormalMap(b, NormalEncoding::Encoded01));
  double l1 = l1_loss(NormalMap(ap, NormalEncoding::Encoded01), NormalMap(bp, NormalEncoding::Encoded01));
  EXPECT_NEAR(l0, l1, 1e-15);
}

TEST(L1Loss, EmptyMaskRejected) {
  Tensor3D a(2, 2, 3, 0.5f);
  NormalMap p(a, NormalEncoding::Encoded01);
  Tensor2D mask(2, 2, 0.0f);
  EXPECT_THROW(l1_loss(p, p, &mask), std::invalid_argument);
}

TEST(Backward, GradientsVanishAtExactFit) {
  MlpWeightsT<double> w = MlpWeightsT<double>::init(17);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 12).cwiseAbs();
  ForwardCacheT<double> cache;
  mlp_forward_batch<double>(w, x, false, cache);
  MlpWeightsT<double> grads = MlpWeightsT<double>::zeros();
  double loss = mlp_backward_batch<double>(w, x, cache.enc, false, grads);
  EXPECT_EQ(loss, 0.0);
  grads.for_each_tensor([](const auto& g) { EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0); });
}

TEST(Backward, DuplicatingBatchLeavesGradientsUnchanged) {
  MlpWeightsT<double> w = MlpWeightsT<double>::init(23);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 6).cwiseAbs();
  Eigen::MatrixXd t = (Eigen::MatrixXd::Random(3, 6).array() * 0.5 + 0.5).matrix();
  Eigen::MatrixXd x2(8, 12), t2(3, 12);
  x2 << x, x;
  t2 << t, t;
  MlpWeightsT<double> g1 = MlpWeightsT<double>::zeros();
  MlpWeightsT<double> g2 = MlpWeightsT<double>::zeros();
  mlp_backward_batch<double>(w, x, t, false, g1);
  mlp_backward_batch<double>(w, x2, t2, false, g2);
  EXPECT_NEAR((g1.w1 - g2.w1).cwiseAbs().maxCoeff(), 0.0, 1e-14);
  EXPECT_NEAR((g1.w3 - g2.w3).cwiseAbs().maxCoeff(), 0.0, 1e-14);
  EXPECT_NEAR((g1.b2 - g2.b2).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(AdamStep, FirstStepMatchesHandEvaluatedUpdate) {
  // One scalar-like parameter with gradient 1: delta = -lr * m_hat /
  // (sqrt(v_hat) + eps) = -0.01 / (1 + 1e-8).
  MlpWeightsT<float> w = MlpWeightsT<float>::zeros();
  MlpWeightsT<float> g = MlpWeightsT<float>::zeros();
  g.b3(0) = 1.0f;
  AdamStateT<float> state;
  TrainConfig cfg;
  adam_step(w, state, g, cfg);
  EXPECT_EQ(state.step, 1);
  EXPECT_NEAR(w.b3(0), -0.01f / (1.0f + 1e-8f), 1e-9f);
  EXPECT_EQ(w.b3(1), 0.0f);
}

TEST(AdamStep, ZeroGradientWithZeroMomentsIsNoOp) {
  MlpWeightsT<float> w = MlpWeightsT<float>::init(2);
  MlpWeightsT<float> before = w;
  AdamStateT<float> state;
  TrainConfig cfg;
  adam_step(w, state, MlpWeightsT<float>::zeros(), cfg);
  EXPECT_EQ((w.w1 - before.w1).cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_EQ((w.b3 - before.b3).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(AdamStep, IdenticalGradientsGetIdenticalUpdates) {
  MlpWeightsT<float> w = MlpWeightsT<float>::zeros();
  MlpWeightsT<float> g = MlpWeightsT<float>::zeros();
  g.b2(3) = 0.25f;
  g.b2(7) = 0.25f;
  AdamStateT<float> state;
  TrainConfig cfg;
  adam_step(w, state, g, cfg);
  EXPECT_EQ(w.b2(3), w.b2(7));
}

namespace {

struct TinyFixture {
  std::vector<MultiModalFrame> frames;
  MultiModalFrame background;
  std::vector<NormalMap> targets;
  std::vector<TrainSample> train_samples;
  std::vector<TrainSample> val_samples;

  explicit TinyFixture(int n_train = 2) {
    LightingConfig lighting = default_lighting();
    const int w = 64, h = 48;
    background = background_frame(lighting, h, w);
    for (int k = 0; k < n_train + 1; ++k) {
      PressScene scene{w, h, 0.05f,
                       {SpherePress{1.0f + 0.15f * k, 0.25f + 0.03f * k, w / 2.0f + 2 * k,
                                    h / 2.0f - k}}};
      DepthMap d = depth_from_scene(scene);
      NormalMap unit = normals_from_depth(d);
      frames.push_back(render_frame(unit, lighting, 100 + k));
      targets.push_back(encode_normals(unit));
    }
    for (int k = 0; k < n_train; ++k) {
      train_samples.push_back({&frames[k], &background, &targets[k]});
    }
    val_samples.push_back({&frames[n_train], &background, &targets[n_train]});
  }
};

}  // namespace

TEST(Train, ZeroEpochsReturnsSeededInitUntouched) {
  TinyFixture fx;
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 77;
  TrainState state = train(fx.train_samples, fx.val_samples, cfg);
  EXPECT_TRUE(state.history.empty());
  MlpWeights expect = MlpWeights::init(77);
  EXPECT_EQ((state.weights.w1 - expect.w1).cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_EQ((state.weights.w3 - expect.w3).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Train, EmptyDatasetRejected) {
  TrainConfig cfg;
  EXPECT_THROW(train({}, {}, cfg), std::invalid_argument);
}

TEST(Train, SameSeedGivesBitwiseIdenticalHistory) {
  TinyFixture fx;
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 5;
  TrainState a = train(fx.train_samples, fx.val_samples, cfg);
  TrainState b = train(fx.train_samples, fx.val_samples, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (size_t k = 0; k < a.history.size(); ++k) {
    EXPECT_EQ(a.history[k].train_l1, b.history[k].train_l1);
    EXPECT_EQ(a.history[k].val_l1, b.history[k].val_l1);
  }
  EXPECT_EQ((a.weights.w2 - b.weights.w2).cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Train, ConvergesWithoutDivergingOverTwentyEpochs) {
  // The 18-of-20 non-increasing property is checked on the full benchmark
  // fixture in the acceptance suite; this miniature fixture has ~50x fewer
  // steps per epoch, so here we assert convergence and the absence of
  // blow-ups rather than epoch-count statistics.
  TinyFixture fx;
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 1;
  TrainState state = train(fx.train_samples, fx.val_samples, cfg);
  ASSERT_EQ(state.history.size(), 21u);
  for (int e = 1; e <= 20; ++e) {
    EXPECT_LT(state.history[e].train_l1, 1.5 * state.history[e - 1].train_l1 + 1e-4);
  }
  EXPECT_LT(state.history.back().train_l1, 0.5 * state.history.front().train_l1);
  EXPECT_LT(state.history.back().val_l1, 0.5 * state.history.front().val_l1);
}

TEST(TrainState, WeightsManifestRoundTripAndModalityCheck) {
  tactile::testing::TempDir tmp("mlp");
  MlpWeights w = MlpWeights::init(123);
  save_mlp(w, false, "rgb", tmp.path());
  LoadedMlp loaded = load_mlp(tmp.path());
  EXPECT_EQ(loaded.modality, "rgb");
  EXPECT_FALSE(loaded.relu_before_tanh);
  EXPECT_EQ((loaded.weights.w1 - w.w1).cwiseAbs().maxCoeff(), 0.0f);
  EXPECT_EQ((loaded.weights.b2 - w.b2).cwiseAbs().maxCoeff(), 0.0f);

  // A corrupted manifest modality is rejected.
  std::ofstream out(tmp.path() + "/manifest.txt");
  out << "layers = 8 128 64 3\nrelu_before_tanh = 0\nmodality = thermal\n";
  out.close();
  EXPECT_THROW(load_mlp(tmp.path()), IoError);
}

TEST(LossCsv, DeterministicFormatting) {
  tactile::testing::TempDir tmp("csv");
  std::vector<EpochRecord> hist = {{0, 0.25, 0.26}, {1, 0.125, 0.13}};
  write_loss_csv(hist, tmp.path() + "/a.csv");
  write_loss_csv(hist, tmp.path() + "/b.csv");
  std::ifstream a(tmp.path() + "/a.csv"), b(tmp.path() + "/b.csv");
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  EXPECT_EQ(sa, sb);
  EXPECT_NE(sa.find("epoch,train_l1,val_l1"), std::string::npos);
}
