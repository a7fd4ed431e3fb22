#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/test_util.hpp"
#include "tactile/metrics.hpp"

using namespace tactile;

namespace {

NormalMap constant_map(int h, int w, std::array<float, 3> n, NormalEncoding enc) {
  Tensor3D t(h, w, 3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int c = 0; c < 3; ++c) t.at(i, j, c) = n[c];
    }
  }
  return NormalMap(std::move(t), enc);
}

NormalMap random_unit_map(int h, int w, uint32_t seed) {
  std::mt19937 rng(seed);
  Tensor3D t(h, w, 3);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      auto v = tactile::testing::random_unit_vector(rng);
      for (int c = 0; c < 3; ++c) t.at(i, j, c) = static_cast<float>(v[c]);
    }
  }
  return NormalMap(std::move(t), NormalEncoding::Unit);
}

}  // namespace

TEST(AngularMae, IdenticalMapsScoreZero) {
  NormalMap m = random_unit_map(8, 8, 3);
  EXPECT_LT(angular_mae(m, m), 1e-4);
}

TEST(AngularMae, OrthogonalVectorsScoreNinety) {
  NormalMap a = constant_map(4, 4, {0, 0, 1}, NormalEncoding::Unit);
  NormalMap b = constant_map(4, 4, {0, 1, 0}, NormalEncoding::Unit);
  EXPECT_NEAR(angular_mae(a, b), 90.0, 1e-5);
}

TEST(AngularMae, MixedPixelsAverageArithmetically) {
  Tensor3D pred(1, 2, 3), gt(1, 2, 3);
  // pixel 0: identical (+z); pixel 1: orthogonal.
  pred.at(0, 0, 2) = 1.0f;
  gt.at(0, 0, 2) = 1.0f;
  pred.at(0, 1, 2) = 1.0f;
  gt.at(0, 1, 1) = 1.0f;
  double mae = angular_mae(NormalMap(pred, NormalEncoding::Unit),
                           NormalMap(gt, NormalEncoding::Unit));
  EXPECT_NEAR(mae, 45.0, 1e-5);
}

TEST(AngularMae, SymmetricAndEncodingInvariant) {
  NormalMap a = random_unit_map(6, 6, 11);
  NormalMap b = random_unit_map(6, 6, 12);
  double ab = angular_mae(a, b);
  double ba = angular_mae(b, a);
  EXPECT_NEAR(ab, ba, 1e-9);
  double enc = angular_mae(encode_normals(a), b);
  EXPECT_NEAR(ab, enc, 2e-4);  // float encode/decode round-off
}

TEST(AngularMae, MaskSelectsPixels) {
  NormalMap a = constant_map(2, 2, {0, 0, 1}, NormalEncoding::Unit);
  Tensor3D t(2, 2, 3);
  t.at(0, 0, 2) = 1.0f;                    // 0 degrees
  t.at(0, 1, 0) = 1.0f;                    // 90 degrees
  t.at(1, 0, 1) = 1.0f;                    // 90 degrees
  t.at(1, 1, 2) = -1.0f;                   // 180 degrees
  NormalMap b(t, NormalEncoding::Unit);
  Tensor2D mask(2, 2, 0.0f);
  mask.at(0, 0) = 1.0f;
  mask.at(1, 1) = 1.0f;
  EXPECT_NEAR(angular_mae(a, b, &mask), 90.0, 1e-5);
  Tensor2D empty(2, 2, 0.0f);
  EXPECT_THROW(angular_mae(a, b, &empty), std::invalid_argument);
}

TEST(DepthRmse, KnownValues) {
  DepthMap a(Tensor2D(4, 4, 0.3f), 0.05f);
  DepthMap b(Tensor2D(4, 4, 0.4f), 0.05f);
  EXPECT_NEAR(depth_rmse(a, a), 0.0, 1e-12);
  EXPECT_NEAR(depth_rmse(a, b), 0.1, 1e-7);
}

TEST(DepthRmse, MatchesNaiveTwoPassComputation) {
  std::mt19937 rng(77);
  auto u = [&rng]() { return float((rng() >> 8) * (1.0 / 16777216.0)); };
  Tensor2D a(16, 16), b(16, 16, 0.0f);
  for (auto& v : a.data) v = u();
  double naive = 0.0;
  for (size_t k = 0; k < a.data.size(); ++k) {
    naive += double(a.data[k]) * a.data[k];
  }
  naive = std::sqrt(naive / a.data.size());
  EXPECT_NEAR(depth_rmse(DepthMap(a, 0.05f), DepthMap(b, 0.05f)), naive, 1e-12);
}

TEST(DepthRmse, PitchMismatchRejected) {
  DepthMap a(Tensor2D(4, 4, 0.0f), 0.05f);
  DepthMap b(Tensor2D(4, 4, 0.0f), 0.10f);
  EXPECT_THROW(depth_rmse(a, b), std::invalid_argument);
}

TEST(Masks, ContactAndInteriorHelpers) {
  Tensor2D depth(6, 6, 0.0f);
  depth.at(2, 2) = 0.5f;
  depth.at(3, 3) = 0.2f;
  Tensor2D contact = contact_mask(DepthMap(depth, 0.05f));
  EXPECT_EQ(contact.at(2, 2), 1.0f);
  EXPECT_EQ(contact.at(0, 0), 0.0f);
  Tensor2D interior = interior_mask(6, 6, 2);
  EXPECT_EQ(interior.at(0, 0), 0.0f);
  EXPECT_EQ(interior.at(2, 2), 1.0f);
  Tensor2D both = intersect_masks(contact, interior);
  EXPECT_EQ(both.at(2, 2), 1.0f);
  EXPECT_EQ(both.at(3, 3), 1.0f);
  EXPECT_EQ(both.at(0, 0), 0.0f);
  EXPECT_THROW(interior_mask(6, 6, 3), std::invalid_argument);
}
