#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "samba/feature_stack.hpp"
#include "samba/filters.hpp"

namespace {

using namespace samba;

FeatureConfig all_disabled() {
  FeatureConfig c;
  c.enable_gaussian = c.enable_sobel = c.enable_hessian = c.enable_dog = false;
  return c;
}

GrayImage random_gray(std::uint64_t seed, int h, int w) {
  std::mt19937_64 rng(seed);
  return GrayImage(oracle::random_image(rng, h, w));
}

TEST(FeatureNames, DefaultConfigHasTwentyFive) {
  const auto names = feature_names(FeatureConfig{});
  ASSERT_EQ(names.size(), 25u);
  EXPECT_EQ(names.front(), "original");
  EXPECT_EQ(names[1], "gaussian_s1");
  EXPECT_EQ(names[6], "sobel_s1");
  EXPECT_EQ(names[11], "hessian_max_s1");
  EXPECT_EQ(names[12], "hessian_min_s1");
  EXPECT_EQ(names[21], "dog_s1_s2");
  EXPECT_EQ(names[24], "dog_s8_s16");
}

TEST(FeatureNames, OptionalFamiliesAppendInOrder) {
  FeatureConfig c = all_disabled();
  c.enable_window_stats = true;
  c.enable_membrane = true;
  c.window_radii = {1, 3};
  const auto names = feature_names(c);
  ASSERT_EQ(names.size(), 1u + 10u + 6u);
  EXPECT_EQ(names[1], "window_mean_r1");
  EXPECT_EQ(names[2], "window_mean_r3");
  EXPECT_EQ(names[3], "window_min_r1");
  EXPECT_EQ(names[10], "window_variance_r3");
  EXPECT_EQ(names[11], "membrane_sum_19x1");
  EXPECT_EQ(names[16], "membrane_min_19x1");
}

TEST(FeatureNames, Deterministic) {
  EXPECT_EQ(feature_names(FeatureConfig{}), feature_names(FeatureConfig{}));
}

TEST(FeatureConfig, ParseAndFormatRoundTrip) {
  const auto cfg = parse_feature_config(
      "# comment\nsigmas = 0.5, 1.5,3\nenable_sobel = false\nenable_window_stats = true\n"
      "window_radii = 1,2\nmembrane_size = 9\n");
  EXPECT_EQ(cfg.sigmas, (std::vector<double>{0.5, 1.5, 3}));
  EXPECT_FALSE(cfg.enable_sobel);
  EXPECT_TRUE(cfg.enable_window_stats);
  EXPECT_EQ(cfg.membrane_size, 9);
  const auto again = parse_feature_config(format_feature_config(cfg));
  EXPECT_EQ(feature_names(again), feature_names(cfg));
}

TEST(FeatureConfig, RejectsBadValues) {
  auto code = [](const std::string& text) {
    try {
      parse_feature_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::MalformedFile;
  };
  EXPECT_EQ(code("sigmas = 1, 0\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code("sigmas = 2, 1\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code("colour = blue\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code("membrane_size = 4\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code("window_radii = 0\n"), ErrorCode::InvalidConfig);
  EXPECT_EQ(code("enable_dog = maybe\n"), ErrorCode::InvalidConfig);
}

TEST(BuildFeatureStack, DefaultShapeAndIdentityFeature) {
  const GrayImage img = random_gray(1, 13, 17);
  const FeatureStack s = build_feature_stack(img, FeatureConfig{});
  ASSERT_EQ(s.n_features(), 25);
  EXPECT_EQ(s.names(), feature_names(FeatureConfig{}));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) EXPECT_EQ(s.pixel(x, y)(0), img(x, y));
}

TEST(BuildFeatureStack, AllDisabledIsRawOnly) {
  const FeatureStack s = build_feature_stack(random_gray(2, 5, 6), all_disabled());
  EXPECT_EQ(s.n_features(), 1);
}

TEST(BuildFeatureStack, ColumnsMatchFilters) {
  const GrayImage img = random_gray(3, 16, 16);
  FeatureConfig c;
  c.sigmas = {1, 2};
  c.enable_window_stats = true;
  c.enable_membrane = true;
  c.window_radii = {2};
  c.membrane_size = 7;
  const FeatureStack s = build_feature_stack(img, c, 3);
  const auto& names = s.names();
  auto column = [&](const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    EXPECT_NE(it, names.end()) << name;
    return s.feature_plane(it - names.begin());
  };
  const PlaneD& p = img.plane();
  EXPECT_LT(oracle::max_abs_diff(column("gaussian_s2"), oracle::gaussian(p, 2)), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(column("sobel_s1"), oracle::sobel(oracle::gaussian(p, 1))), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(column("hessian_min_s2"), oracle::hessian(oracle::gaussian(p, 2)).smallest),
            1e-12);
  EXPECT_LT(oracle::max_abs_diff(column("dog_s1_s2"), oracle::gaussian(p, 2) - oracle::gaussian(p, 1)), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(column("window_median_r2"), oracle::window(p, 2, 3)), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(column("membrane_std_7x1"), oracle::membrane(p, 7, 1)[2]), 1e-9);
}

TEST(BuildFeatureStack, WorkerCountDoesNotChangeResult) {
  const GrayImage img = random_gray(4, 20, 18);
  const FeatureStack a = build_feature_stack(img, FeatureConfig{}, 1);
  const FeatureStack b = build_feature_stack(img, FeatureConfig{}, 4);
  EXPECT_TRUE(a.data() == b.data());
}

}  // namespace
