#include "samba/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace samba {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::UnsupportedDepth: return "UnsupportedDepth";
    case ErrorCode::InconsistentStack: return "InconsistentStack";
    case ErrorCode::UnsupportedChannelCount: return "UnsupportedChannelCount";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyPath: return "EmptyPath";
    case ErrorCode::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NoLabels: return "NoLabels";
    case ErrorCode::EmptyCounts: return "EmptyCounts";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::FeatureMismatch: return "FeatureMismatch";
    case ErrorCode::MalformedModel: return "MalformedModel";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::InferenceFailure: return "InferenceFailure";
  }
  return "Unknown";
}

RasterImage::RasterImage(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::MalformedFile, "image dimensions must be positive");
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::UnsupportedChannelCount,
                "unsupported channel count " + std::to_string(channels));
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::MalformedFile, "sample count does not match dimensions");
  }
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw Error(ErrorCode::MalformedFile, "sample outside [0,1]");
    }
  }
}

PlaneD RasterImage::channel(int c) const {
  PlaneD out(height_, width_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) out(y, x) = at(x, y, c);
  }
  return out;
}

ImageStack::ImageStack(std::vector<RasterImage> slices) : slices_(std::move(slices)) {
  if (slices_.empty()) throw Error(ErrorCode::MalformedFile, "image has no pages");
  const auto& first = slices_.front();
  for (const auto& s : slices_) {
    if (s.width() != first.width() || s.height() != first.height() ||
        s.channels() != first.channels()) {
      throw Error(ErrorCode::InconsistentStack, "stack pages differ in shape");
    }
  }
}

GrayImage::GrayImage(PlaneD values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw Error(ErrorCode::MalformedFile, "empty gray image");
  }
  if (!values_.allFinite() || (values_ < 0.0).any() || (values_ > 1.0).any()) {
    throw Error(ErrorCode::MalformedFile, "gray values must lie in [0,1]");
  }
}

GrayImage to_grayscale(const RasterImage& img) {
  if (img.channels() == 1) return GrayImage(img.channel(0));
  if (img.channels() != 3) {
    throw Error(ErrorCode::UnsupportedChannelCount, "expected 1 or 3 channels");
  }
  PlaneD luma = 0.2126 * img.channel(0) + 0.7152 * img.channel(1) + 0.0722 * img.channel(2);
  return GrayImage(luma.cwiseMax(0.0).cwiseMin(1.0));
}

namespace {

RasterImage normalize_page(const RawPage& page) {
  std::vector<double> out(page.values.size());
  switch (page.sample) {
    case RawPage::Sample::U8:
      std::transform(page.values.begin(), page.values.end(), out.begin(),
                     [](double v) { return v / 255.0; });
      break;
    case RawPage::Sample::U16:
      std::transform(page.values.begin(), page.values.end(), out.begin(),
                     [](double v) { return v / 65535.0; });
      break;
    case RawPage::Sample::F32: {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (double v : page.values) {
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      const double span = hi - lo;
      std::transform(page.values.begin(), page.values.end(), out.begin(), [&](double v) {
        if (std::isnan(v) || !(span > 0.0)) return 0.0;
        if (std::isinf(v)) return v > 0 ? 1.0 : 0.0;
        return std::clamp((v - lo) / span, 0.0, 1.0);
      });
      break;
    }
  }
  return RasterImage(page.width, page.height, page.channels, std::move(out));
}

}  // namespace

ImageStack decode_image(std::span<const std::uint8_t> bytes, ImageFormat hint) {
  std::vector<RawPage> pages = decode_raw(bytes, hint);
  std::vector<RasterImage> slices;
  slices.reserve(pages.size());
  for (const auto& p : pages) slices.push_back(normalize_page(p));
  return ImageStack(std::move(slices));
}

std::uint8_t quantize_unit(double v) noexcept {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(scaled);
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  ClassPlane q = img.plane().unaryExpr([](double v) { return quantize_unit(v); });
  return encode_png(q);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace samba
