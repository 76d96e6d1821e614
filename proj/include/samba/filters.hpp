#pragma once

// Filter bank behind the feature stack. Every filter reads outside the image
// through symmetric reflection (edge sample repeated: ... 1 0 | 0 1 ... ),
// folded repeatedly when a kernel is wider than the image, so all filters
// commute with mirroring the input.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "samba/error.hpp"
#include "samba/image.hpp"

namespace samba {

/// Symmetric reflection of an arbitrary index into [0, n).
inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  const Eigen::Index period = 2 * n;
  Eigen::Index m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

inline std::vector<Eigen::Index> shifted_indices(Eigen::Index n, Eigen::Index offset) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = reflect_index(i + offset, n);
  return idx;
}

/// out(y, x) = in(reflect(y + dy), reflect(x + dx)).
template <typename Scalar>
Plane<Scalar> shifted(const Plane<Scalar>& in, Eigen::Index dy, Eigen::Index dx) {
  return in(shifted_indices(in.rows(), dy), shifted_indices(in.cols(), dx));
}

/// Normalized 1-D Gaussian taps, radius ceil(3 sigma).
template <typename Scalar = double>
Eigen::Array<Scalar, Eigen::Dynamic, 1> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "sigma must be positive");
  const auto radius = static_cast<Eigen::Index>(std::ceil(3.0 * sigma));
  Eigen::Array<Scalar, Eigen::Dynamic, 1> k(2 * radius + 1);
  for (Eigen::Index i = -radius; i <= radius; ++i) {
    k(i + radius) = static_cast<Scalar>(std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma)));
  }
  return k / k.sum();
}

/// Correlates every row with `taps` (centered), then every column.
template <typename Scalar>
Plane<Scalar> separable_filter(const Plane<Scalar>& in,
                               const Eigen::Array<Scalar, Eigen::Dynamic, 1>& taps) {
  const Eigen::Index radius = taps.size() / 2;
  const Eigen::Index rows = in.rows();
  const Eigen::Index cols = in.cols();

  Plane<Scalar> horizontal = Plane<Scalar>::Zero(rows, cols);
  for (Eigen::Index x = 0; x < cols; ++x) {
    for (Eigen::Index k = 0; k < taps.size(); ++k) {
      horizontal.col(x) += taps(k) * in.col(reflect_index(x + k - radius, cols));
    }
  }
  Plane<Scalar> out = Plane<Scalar>::Zero(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index k = 0; k < taps.size(); ++k) {
      out.row(y) += taps(k) * horizontal.row(reflect_index(y + k - radius, rows));
    }
  }
  return out;
}

template <typename Scalar>
Plane<Scalar> gaussian_blur(const Plane<Scalar>& img, double sigma) {
  return separable_filter(img, gaussian_kernel<Scalar>(sigma));
}

/// Gradient magnitude from the 3x3 Sobel pair; sigma > 0 pre-smooths.
template <typename Scalar>
Plane<Scalar> sobel_magnitude(const Plane<Scalar>& img, double sigma) {
  const Plane<Scalar> s = sigma > 0.0 ? gaussian_blur(img, sigma) : img;
  const Plane<Scalar> nw = shifted(s, -1, -1), n = shifted(s, -1, 0), ne = shifted(s, -1, 1);
  const Plane<Scalar> w = shifted(s, 0, -1), e = shifted(s, 0, 1);
  const Plane<Scalar> sw = shifted(s, 1, -1), so = shifted(s, 1, 0), se = shifted(s, 1, 1);
  const Plane<Scalar> gx = (ne + 2 * e + se) - (nw + 2 * w + sw);
  const Plane<Scalar> gy = (sw + 2 * so + se) - (nw + 2 * n + ne);
  return (gx.square() + gy.square()).sqrt();
}

template <typename Scalar>
struct HessianEigenvalues {
  Plane<Scalar> largest;
  Plane<Scalar> smallest;
};

/// Eigenvalues of the central-difference Hessian, no smoothing.
template <typename Scalar>
HessianEigenvalues<Scalar> hessian_eigenvalues_unsmoothed(const Plane<Scalar>& s) {
  const Plane<Scalar> ixx = shifted(s, 0, 1) - 2 * s + shifted(s, 0, -1);
  const Plane<Scalar> iyy = shifted(s, 1, 0) - 2 * s + shifted(s, -1, 0);
  const Plane<Scalar> ixy =
      (shifted(s, 1, 1) - shifted(s, -1, 1) - shifted(s, 1, -1) + shifted(s, -1, -1)) / 4;
  const Plane<Scalar> half_trace = (ixx + iyy) / 2;
  const Plane<Scalar> spread = (((ixx - iyy) / 2).square() + ixy.square()).sqrt();
  return {half_trace + spread, half_trace - spread};
}

/// Eigenvalues of the central-difference Hessian of the sigma-smoothed image.
template <typename Scalar>
HessianEigenvalues<Scalar> hessian_eigenvalues(const Plane<Scalar>& img, double sigma) {
  return hessian_eigenvalues_unsmoothed(gaussian_blur(img, sigma));
}

/// blur(sigma_b) - blur(sigma_a).
template <typename Scalar>
Plane<Scalar> difference_of_gaussians(const Plane<Scalar>& img, double sigma_a, double sigma_b) {
  return gaussian_blur(img, sigma_b) - gaussian_blur(img, sigma_a);
}

enum class WindowStat { Mean, Min, Max, Median, Variance };

inline constexpr std::array<WindowStat, 5> kWindowStats = {
    WindowStat::Mean, WindowStat::Min, WindowStat::Max, WindowStat::Median, WindowStat::Variance};

inline const char* window_stat_name(WindowStat s) {
  switch (s) {
    case WindowStat::Mean: return "mean";
    case WindowStat::Min: return "min";
    case WindowStat::Max: return "max";
    case WindowStat::Median: return "median";
    case WindowStat::Variance: return "variance";
  }
  return "?";
}

/// All five statistics of the (2r+1)^2 neighbourhood, indexed like kWindowStats.
template <typename Scalar>
std::array<Plane<Scalar>, 5> window_statistics(const Plane<Scalar>& img, int radius) {
  if (radius < 1) throw Error(ErrorCode::InvalidConfig, "window radius must be >= 1");
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();
  const Eigen::Index side = 2 * radius + 1;
  std::array<Plane<Scalar>, 5> out;
  for (auto& p : out) p.resize(rows, cols);

  std::vector<Eigen::Index> col_idx(static_cast<std::size_t>(cols + 2 * radius));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(col_idx.size()); ++i) {
    col_idx[static_cast<std::size_t>(i)] = reflect_index(i - radius, cols);
  }
  std::vector<Scalar> window(static_cast<std::size_t>(side * side));
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      std::size_t k = 0;
      for (Eigen::Index dy = -radius; dy <= radius; ++dy) {
        const auto row = img.row(reflect_index(y + dy, rows));
        for (Eigen::Index dx = 0; dx < side; ++dx) {
          window[k++] = row(col_idx[static_cast<std::size_t>(x + dx)]);
        }
      }
      Scalar sum = 0;
      for (Scalar v : window) sum += v;
      const Scalar mean = sum / static_cast<Scalar>(window.size());
      Scalar sq = 0;
      for (Scalar v : window) sq += (v - mean) * (v - mean);
      const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
      std::nth_element(window.begin(), mid, window.end());
      const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
      out[0](y, x) = mean;
      out[1](y, x) = *lo;
      out[2](y, x) = *hi;
      out[3](y, x) = *mid;
      out[4](y, x) = sq / static_cast<Scalar>(window.size());
    }
  }
  return out;
}

template <typename Scalar>
Plane<Scalar> window_statistic(const Plane<Scalar>& img, int radius, WindowStat stat) {
  auto all = window_statistics(img, radius);
  return std::move(all[static_cast<std::size_t>(stat)]);
}

/// size x size kernel holding a centered vertical line of `width` ones,
/// rotated by `degrees` with bilinear resampling, normalized to sum 1.
template <typename Scalar = double>
Plane<Scalar> membrane_kernel(int size, int width, double degrees) {
  const int c = size / 2;
  auto base = [&](double y, double x) -> double {
    const int xi = static_cast<int>(std::lround(x));
    const int yi = static_cast<int>(std::lround(y));
    if (xi < 0 || yi < 0 || xi >= size || yi >= size) return 0.0;
    const int first = c - (width - 1) / 2;
    return (xi >= first && xi < first + width) ? 1.0 : 0.0;
  };
  auto bilinear = [&](double y, double x) {
    const double x0 = std::floor(x), y0 = std::floor(y);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * base(y0, x0) + fx * base(y0, x0 + 1)) +
           fy * ((1 - fx) * base(y0 + 1, x0) + fx * base(y0 + 1, x0 + 1));
  };
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  Plane<Scalar> k(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double dy = i - c, dx = j - c;
      // Inverse rotation: sample the unrotated line.
      const double sx = cs * dx + sn * dy;
      const double sy = -sn * dx + cs * dy;
      double v = bilinear(sy + c, sx + c);
      if (std::abs(v) < 1e-12) v = 0.0;
      k(i, j) = static_cast<Scalar>(v);
    }
  }
  return k / k.sum();
}

/// Dense 2-D correlation with a square, odd-sized kernel.
template <typename Scalar>
Plane<Scalar> correlate(const Plane<Scalar>& img, const Plane<Scalar>& kernel) {
  const Eigen::Index r = kernel.rows() / 2;
  Plane<Scalar> out = Plane<Scalar>::Zero(img.rows(), img.cols());
  for (Eigen::Index i = 0; i < kernel.rows(); ++i) {
    for (Eigen::Index j = 0; j < kernel.cols(); ++j) {
      if (kernel(i, j) != Scalar(0)) out += kernel(i, j) * shifted(img, i - r, j - r);
    }
  }
  return out;
}

inline constexpr int kMembraneOrientations = 6;
inline constexpr std::array<const char*, 6> kMembraneProjectionNames = {"sum", "mean", "std",
                                                                        "median", "max", "min"};

/// Six line-kernel responses (30 degree steps) reduced per pixel to
/// sum, mean, std-dev, median, max, min.
template <typename Scalar>
std::array<Plane<Scalar>, 6> membrane_projections(const Plane<Scalar>& img, int size, int width) {
  std::array<Plane<Scalar>, kMembraneOrientations> responses;
  for (int k = 0; k < kMembraneOrientations; ++k) {
    responses[k] = correlate(img, membrane_kernel<Scalar>(size, width, 30.0 * k));
  }
  std::array<Plane<Scalar>, 6> out;
  for (auto& p : out) p.resize(img.rows(), img.cols());
  std::array<Scalar, kMembraneOrientations> v;
  for (Eigen::Index y = 0; y < img.rows(); ++y) {
    for (Eigen::Index x = 0; x < img.cols(); ++x) {
      Scalar sum = 0;
      for (int k = 0; k < kMembraneOrientations; ++k) {
        v[k] = responses[k](y, x);
        sum += v[k];
      }
      const Scalar mean = sum / kMembraneOrientations;
      Scalar sq = 0;
      for (Scalar s : v) sq += (s - mean) * (s - mean);
      std::sort(v.begin(), v.end());
      out[0](y, x) = sum;
      out[1](y, x) = mean;
      out[2](y, x) = std::sqrt(sq / kMembraneOrientations);
      out[3](y, x) = (v[2] + v[3]) / 2;
      out[4](y, x) = v[5];
      out[5](y, x) = v[0];
    }
  }
  return out;
}

}  // namespace samba
