#include "samba/smart_label.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>

namespace samba {

BinaryMask region_grow(const GrayImage& img, Pixel seed, double tolerance) {
  const int w = img.width(), h = img.height();
  if (seed.x < 0 || seed.y < 0 || seed.x >= w || seed.y >= h) {
    throw Error(ErrorCode::OutOfBounds, "seed outside the image");
  }
  tolerance = std::max(tolerance, 0.0);
  const double ref = img(seed.x, seed.y);
  BinaryMask mask = BinaryMask::Zero(h, w);
  std::deque<Pixel> queue{seed};
  mask(seed.y, seed.x) = 1;
  constexpr int kDx[4] = {1, -1, 0, 0};
  constexpr int kDy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const Pixel p = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int x = p.x + kDx[k], y = p.y + kDy[k];
      if (x < 0 || y < 0 || x >= w || y >= h || mask(y, x)) continue;
      if (std::abs(img(x, y) - ref) <= tolerance) {
        mask(y, x) = 1;
        queue.push_back({x, y});
      }
    }
  }
  return mask;
}

double compactness_quality(const BinaryMask& mask) {
  const Eigen::Index h = mask.rows(), w = mask.cols();
  std::size_t area = 0, perimeter = 0;
  auto outside = [&](Eigen::Index y, Eigen::Index x) {
    return y < 0 || x < 0 || y >= h || x >= w || mask(y, x) == 0;
  };
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      ++area;
      perimeter += outside(y - 1, x) + outside(y + 1, x) + outside(y, x - 1) + outside(y, x + 1);
    }
  }
  if (area == 0) return 0.0;
  return 1.0 / (1.0 + static_cast<double>(perimeter) / static_cast<double>(area));
}

MaskTriple order_by_area(std::array<MaskProposal, 3> proposals) {
  std::stable_sort(proposals.begin(), proposals.end(), [](const auto& a, const auto& b) {
    return (a.mask != 0).count() < (b.mask != 0).count();
  });
  for (int i = 0; i < 3; ++i) proposals[static_cast<std::size_t>(i)].scale_rank = i;
  return MaskTriple{std::move(proposals)};
}

const MaskProposal& select_scale(const MaskTriple& triple, int scale_index) {
  const int i = ((scale_index % 3) + 3) % 3;
  return triple.proposals[static_cast<std::size_t>(i)];
}

LabelDelta accept_mask(const MaskProposal& proposal, std::uint8_t class_id) {
  LabelDelta delta{{}, class_id, DeltaSource::SmartMask};
  const auto& m = proposal.mask;
  for (Eigen::Index y = 0; y < m.rows(); ++y) {
    for (Eigen::Index x = 0; x < m.cols(); ++x) {
      if (m(y, x)) delta.pixels.push_back({static_cast<int>(x), static_cast<int>(y)});
    }
  }
  return delta;
}

ImageEmbedding MockBackend::compute_embedding(const RasterImage& img) const {
  ImageEmbedding e;
  e.backend_id = id();
  e.shape = {img.height(), img.width(), img.channels()};
  e.values.assign(img.data().begin(), img.data().end());
  return e;
}

MaskTriple MockBackend::prompt_masks(const ImageEmbedding& embedding, const PromptPoint& point) const {
  if (embedding.backend_id != id() || embedding.shape.size() != 3) {
    throw Error(ErrorCode::InferenceFailure, "embedding was not produced by the mock backend");
  }
  const auto h = static_cast<int>(embedding.shape[0]);
  const auto w = static_cast<int>(embedding.shape[1]);
  const auto c = static_cast<int>(embedding.shape[2]);
  std::vector<double> data(embedding.values.begin(), embedding.values.end());
  const GrayImage gray = to_grayscale(RasterImage(w, h, c, std::move(data)));

  std::array<MaskProposal, 3> proposals;
  for (std::size_t i = 0; i < kMockTolerances.size(); ++i) {
    auto mask = region_grow(gray, {point.x, point.y}, kMockTolerances[i]);
    const double quality = compactness_quality(mask);
    proposals[i] = MaskProposal{std::move(mask), quality, static_cast<int>(i)};
  }
  return order_by_area(std::move(proposals));
}

OnnxBackend::OnnxBackend(std::string encoder_path, std::string decoder_path)
    : encoder_path_(std::move(encoder_path)), decoder_path_(std::move(decoder_path)) {}

namespace {

[[noreturn]] void onnx_unavailable(const std::string& encoder, const std::string& decoder) {
  for (const auto& path : {encoder, decoder}) {
    if (path.empty() || !std::filesystem::is_regular_file(path)) {
      throw Error(ErrorCode::BackendUnavailable, "model file not found: '" + path + "'");
    }
  }
  throw Error(ErrorCode::BackendUnavailable,
              "this build has no ONNX model runtime; unset SAMBA_ENCODER_PATH and "
              "SAMBA_DECODER_PATH to use the mock backend");
}

}  // namespace

ImageEmbedding OnnxBackend::compute_embedding(const RasterImage&) const {
  onnx_unavailable(encoder_path_, decoder_path_);
}

MaskTriple OnnxBackend::prompt_masks(const ImageEmbedding&, const PromptPoint&) const {
  onnx_unavailable(encoder_path_, decoder_path_);
}

std::shared_ptr<const SmartLabelBackend> backend_from_environment() {
  const char* enc = std::getenv("SAMBA_ENCODER_PATH");
  const char* dec = std::getenv("SAMBA_DECODER_PATH");
  if ((enc && *enc) || (dec && *dec)) {
    return std::make_shared<OnnxBackend>(enc ? enc : "", dec ? dec : "");
  }
  return std::make_shared<MockBackend>();
}

}  // namespace samba
