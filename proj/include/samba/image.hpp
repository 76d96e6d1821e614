#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "samba/error.hpp"

namespace samba {

/// Row-major 2-D raster; rows are image rows (y), columns are x.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PlaneD = Plane<double>;
using ClassPlane = Plane<std::uint8_t>;

/// Decoded picture with interleaved channels, every sample in [0,1].
class RasterImage {
 public:
  RasterImage(int width, int height, int channels, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  /// One channel as a plane.
  PlaneD channel(int c) const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_;
  int height_;
  int channels_;
  std::vector<double> data_;
};

/// Non-empty sequence of equally shaped slices.
class ImageStack {
 public:
  explicit ImageStack(std::vector<RasterImage> slices);

  const std::vector<RasterImage>& slices() const noexcept { return slices_; }
  const RasterImage& slice(std::size_t i) const { return slices_.at(i); }
  std::size_t size() const noexcept { return slices_.size(); }
  int width() const noexcept { return slices_.front().width(); }
  int height() const noexcept { return slices_.front().height(); }
  int channels() const noexcept { return slices_.front().channels(); }

 private:
  std::vector<RasterImage> slices_;
};

/// Single-channel intensities in [0,1]; the filter bank's input.
class GrayImage {
 public:
  explicit GrayImage(PlaneD values);

  int width() const noexcept { return static_cast<int>(values_.cols()); }
  int height() const noexcept { return static_cast<int>(values_.rows()); }
  const PlaneD& plane() const noexcept { return values_; }
  double operator()(int x, int y) const { return values_(y, x); }

 private:
  PlaneD values_;
};

enum class ImageFormat { Auto, Png, Jpeg, Tiff };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) noexcept;

/// Integer or float samples exactly as stored, before normalization.
struct RawPage {
  int width = 0;
  int height = 0;
  int channels = 0;
  enum class Sample { U8, U16, F32 } sample = Sample::U8;
  std::vector<double> values;  // interleaved, raw units
};

std::vector<RawPage> decode_raw(std::span<const std::uint8_t> bytes,
                                ImageFormat hint = ImageFormat::Auto);

/// 8-bit samples / 255, 16-bit / 65535, float samples min-max rescaled per
/// page (a constant page maps to zeros). Alpha is dropped.
ImageStack decode_image(std::span<const std::uint8_t> bytes,
                        ImageFormat hint = ImageFormat::Auto);

/// Rec. 709 luminance for RGB; single channel passes through.
GrayImage to_grayscale(const RasterImage& img);

/// Lossless 8-bit grayscale PNG; values written verbatim.
std::vector<std::uint8_t> encode_png(const ClassPlane& values);

/// Intensities scaled by 255, rounded half-up.
std::vector<std::uint8_t> encode_png(const GrayImage& img);

std::uint8_t quantize_unit(double v) noexcept;

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace samba
