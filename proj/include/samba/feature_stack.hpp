#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "samba/image.hpp"

namespace samba {

struct FeatureConfig {
  std::vector<double> sigmas{1, 2, 4, 8, 16};
  bool enable_gaussian = true;
  bool enable_sobel = true;
  bool enable_hessian = true;
  bool enable_dog = true;
  bool enable_window_stats = false;
  bool enable_membrane = false;
  std::vector<int> window_radii{2, 4};
  int membrane_size = 19;
  int membrane_width = 1;

  /// Throws InvalidConfig on any broken invariant.
  void validate() const;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// `key = value` lines, `#` comments; unknown keys are rejected.
FeatureConfig parse_feature_config(const std::string& text);
std::string format_feature_config(const FeatureConfig& cfg);

/// Feature names in stack order; a pure function of the config.
std::vector<std::string> feature_names(const FeatureConfig& cfg);

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One row per pixel (row-major pixel order), one column per feature.
class FeatureStack {
 public:
  FeatureStack(int width, int height, std::vector<std::string> names, FeatureMatrix data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Eigen::Index n_features() const noexcept { return data_.cols(); }
  Eigen::Index n_pixels() const noexcept { return data_.rows(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const FeatureMatrix& data() const noexcept { return data_; }
  FeatureMatrix& mutable_data() noexcept { return data_; }

  auto pixel(int x, int y) const { return data_.row(static_cast<Eigen::Index>(y) * width_ + x); }

  /// Feature `f` reshaped to the image grid.
  PlaneD feature_plane(Eigen::Index f) const;

 private:
  int width_;
  int height_;
  std::vector<std::string> names_;
  FeatureMatrix data_;
};

/// `workers` only changes scheduling; the result is bitwise identical.
FeatureStack build_feature_stack(const GrayImage& img, const FeatureConfig& cfg, int workers = 1);

}  // namespace samba
