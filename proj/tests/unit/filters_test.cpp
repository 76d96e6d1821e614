#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "samba/filters.hpp"

namespace {

using namespace samba;

PlaneD mirror(const PlaneD& p) { return p.rowwise().reverse(); }

PlaneD impulse(int n) {
  PlaneD p = PlaneD::Zero(n, n);
  p(n / 2, n / 2) = 1.0;
  return p;
}

TEST(GaussianKernel, SumsToOneWithRadiusThreeSigma) {
  const auto k = gaussian_kernel(2.0);
  EXPECT_EQ(k.size(), 13);
  EXPECT_NEAR(k.sum(), 1.0, 1e-15);
  EXPECT_THROW(gaussian_kernel(0.0), Error);
  EXPECT_THROW(gaussian_kernel(-1.0), Error);
}

TEST(GaussianBlur, ConstantStaysConstant) {
  const PlaneD c = PlaneD::Constant(12, 9, 0.37);
  for (double s : {0.5, 1.0, 4.0, 16.0}) EXPECT_LT(oracle::max_abs_diff(gaussian_blur(c, s), c), 1e-12);
}

TEST(GaussianBlur, ImpulseIsKernelOuterProduct) {
  const PlaneD out = gaussian_blur(impulse(33), 2.0);
  EXPECT_LT(oracle::max_abs_diff(out, oracle::gaussian(impulse(33), 2.0)), 1e-6);
  const Eigen::VectorXd t = oracle::gaussian_taps(2.0);
  const Eigen::MatrixXd outer = t * t.transpose();
  EXPECT_NEAR(out.block(10, 10, 13, 13).matrix().cwiseAbs().sum(), outer.sum(), 1e-12);
  EXPECT_LT((out.block(10, 10, 13, 13).matrix() - outer).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GaussianBlur, SymmetricInputStaysSymmetric) {
  std::mt19937_64 rng(5);
  PlaneD half = oracle::random_image(rng, 10, 6);
  PlaneD img(10, 12);
  img << half, mirror(half);
  const PlaneD out = gaussian_blur(img, 1.5);
  EXPECT_LT(oracle::max_abs_diff(out, mirror(out)), 1e-12);
}

TEST(GaussianBlur, KernelWiderThanImageReflectsRepeatedly) {
  std::mt19937_64 rng(6);
  const PlaneD img = oracle::random_image(rng, 5, 4);
  EXPECT_LT(oracle::max_abs_diff(gaussian_blur(img, 8.0), oracle::gaussian(img, 8.0)), 1e-12);
}

TEST(Sobel, ConstantIsZero) {
  EXPECT_EQ(sobel_magnitude(PlaneD(PlaneD::Constant(7, 7, 0.4)), 0.0).abs().maxCoeff(), 0.0);
}

TEST(Sobel, RampInteriorMatchesOracle) {
  const int w = 11;
  PlaneD ramp(8, w);
  for (int x = 0; x < w; ++x) ramp.col(x).setConstant(x / double(w - 1));
  const PlaneD out = sobel_magnitude(ramp, 0.0);
  const PlaneD ref = oracle::sobel(ramp);
  EXPECT_LT(oracle::max_abs_diff(out, ref), 1e-12);
  const PlaneD interior = out.block(1, 1, 6, w - 2);
  EXPECT_NEAR(interior.maxCoeff(), 8.0 / (w - 1), 1e-12);
  EXPECT_NEAR(interior.minCoeff(), 8.0 / (w - 1), 1e-12);
}

TEST(Sobel, RotationCommutes) {
  std::mt19937_64 rng(8);
  const PlaneD img = oracle::random_image(rng, 9, 9);
  const PlaneD rot = img.transpose().rowwise().reverse();
  const PlaneD a = sobel_magnitude(rot, 0.0);
  const PlaneD b = sobel_magnitude(img, 0.0).transpose().rowwise().reverse();
  EXPECT_LT(oracle::max_abs_diff(a, b), 1e-12);
}

TEST(Hessian, ConstantIsZero) {
  const auto h = hessian_eigenvalues(PlaneD(PlaneD::Constant(9, 9, 0.8)), 1.0);
  EXPECT_LT(h.largest.abs().maxCoeff(), 1e-12);
  EXPECT_LT(h.smallest.abs().maxCoeff(), 1e-12);
  EXPECT_THROW(hessian_eigenvalues(PlaneD(PlaneD::Zero(3, 3)), 0.0), Error);
}

TEST(Hessian, ParabolaHasCurvatureTwo) {
  const int w = 81, h = 21, cx = 40;
  PlaneD img(h, w);
  for (int x = 0; x < w; ++x) img.col(x).setConstant(double(x - cx) * (x - cx));
  const auto out = hessian_eigenvalues(img, 0.5);
  const auto ref = oracle::hessian(oracle::gaussian(img, 0.5));
  for (int y = 5; y < h - 5; ++y) {
    for (int x = cx - 10; x <= cx + 10; ++x) {
      EXPECT_NEAR(out.largest(y, x), 2.0, 1e-3);
      EXPECT_NEAR(out.smallest(y, x), 0.0, 1e-3);
      EXPECT_NEAR(out.largest(y, x), ref.largest(y, x), 1e-9);
    }
  }
}

TEST(Hessian, Ordered) {
  std::mt19937_64 rng(9);
  const auto h = hessian_eigenvalues(oracle::random_image(rng, 14, 11), 1.0);
  EXPECT_TRUE((h.largest >= h.smallest).all());
}

TEST(DoG, EqualSigmasGiveZero) {
  std::mt19937_64 rng(10);
  const PlaneD img = oracle::random_image(rng, 10, 10);
  EXPECT_EQ(difference_of_gaussians(img, 2.0, 2.0).abs().maxCoeff(), 0.0);
  EXPECT_LT(difference_of_gaussians(PlaneD(PlaneD::Constant(6, 6, 0.3)), 1.0, 4.0).abs().maxCoeff(), 1e-12);
}

TEST(DoG, ImpulseMatchesOracle) {
  const PlaneD ref = oracle::gaussian(impulse(21), 2.0) - oracle::gaussian(impulse(21), 1.0);
  EXPECT_LT(oracle::max_abs_diff(difference_of_gaussians(impulse(21), 1.0, 2.0), ref), 1e-6);
}

TEST(WindowStats, ConstantImage) {
  const PlaneD c = PlaneD::Constant(6, 5, 0.6);
  const auto s = window_statistics(c, 2);
  for (int i = 0; i < 4; ++i) EXPECT_LT(oracle::max_abs_diff(s[i], c), 1e-12);
  EXPECT_LT(s[4].abs().maxCoeff(), 1e-12);
  EXPECT_THROW(window_statistics(c, 0), Error);
}

TEST(WindowStats, CheckerboardMean) {
  PlaneD board(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) board(y, x) = (x + y) % 2;
  const PlaneD mean = window_statistic(board, 1, WindowStat::Mean);
  EXPECT_NEAR(mean(3, 3), 4.0 / 9, 1e-12);
  EXPECT_NEAR(mean(3, 4), 5.0 / 9, 1e-12);
  EXPECT_LT(oracle::max_abs_diff(mean, oracle::window(board, 1, 0)), 1e-12);
}

TEST(WindowStats, MatchBruteForce) {
  std::mt19937_64 rng(11);
  const PlaneD img = oracle::random_image(rng, 9, 13);
  for (int r : {1, 2, 5}) {
    const auto s = window_statistics(img, r);
    for (int k = 0; k < 5; ++k) EXPECT_LT(oracle::max_abs_diff(s[k], oracle::window(img, r, k)), 1e-12);
    EXPECT_TRUE((s[1] <= s[3]).all() && (s[3] <= s[2]).all());
  }
}

TEST(Membrane, ConstantImage) {
  const double c = 0.3;
  const auto p = membrane_projections(PlaneD(PlaneD::Constant(10, 10, c)), 9, 1);
  const double expected[] = {6 * c, c, 0, c, c, c};
  for (int k = 0; k < 6; ++k) {
    EXPECT_LT((p[k] - expected[k]).abs().maxCoeff(), 1e-12) << kMembraneProjectionNames[k];
  }
}

TEST(Membrane, KernelsMatchOracleAndSumToOne) {
  for (double deg : {0.0, 30.0, 60.0, 90.0, 120.0, 150.0}) {
    const PlaneD k = membrane_kernel(19, 3, deg);
    EXPECT_NEAR(k.sum(), 1.0, 1e-12);
    EXPECT_LT((k.matrix() - oracle::line_kernel(19, 3, deg)).cwiseAbs().maxCoeff(), 1e-11);
  }
}

TEST(Membrane, VerticalLineRespondsStrongest) {
  PlaneD img = PlaneD::Zero(31, 31);
  img.col(15).setOnes();
  const auto p = membrane_projections(img, 9, 1);
  const auto ref = oracle::membrane(img, 9, 1);
  for (int k = 0; k < 6; ++k) EXPECT_LT(oracle::max_abs_diff(p[k], ref[k]), 1e-9);
  EXPECT_GT(p[4](15, 15), p[4](15, 2));
  EXPECT_TRUE((p[4] >= p[5]).all());
}

TEST(FilterProperties, MirrorCommutesAndOutputsFinite) {
  std::mt19937_64 rng(12);
  const PlaneD img = oracle::random_image(rng, 12, 10);
  const PlaneD m = mirror(img);
  auto check = [](const PlaneD& a, const PlaneD& b) {
    EXPECT_TRUE(a.allFinite());
    EXPECT_LT(oracle::max_abs_diff(a, b), 1e-12);
  };
  check(gaussian_blur(m, 1.5), mirror(gaussian_blur(img, 1.5)));
  check(difference_of_gaussians(m, 1, 2), mirror(difference_of_gaussians(img, 1, 2)));
  check(sobel_magnitude(m, 1.0), mirror(sobel_magnitude(img, 1.0)));
  const auto hm = hessian_eigenvalues(m, 1.0), h = hessian_eigenvalues(img, 1.0);
  check(hm.largest, mirror(h.largest));
  check(hm.smallest, mirror(h.smallest));
  const auto wm = window_statistics(m, 2), w = window_statistics(img, 2);
  for (int k = 0; k < 5; ++k) check(wm[k], mirror(w[k]));
}

}  // namespace
