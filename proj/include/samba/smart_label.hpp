#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "samba/image.hpp"
#include "samba/labels.hpp"

namespace samba {

using BinaryMask = Plane<std::uint8_t>;  // 0 or 1

struct PromptPoint {
  int x = 0;
  int y = 0;
  int slice_index = 0;
};

struct MaskProposal {
  BinaryMask mask;
  double quality = 0.0;
  int scale_rank = 0;  // 0 finest .. 2 coarsest
};

/// Three proposals ordered by nondecreasing area.
struct MaskTriple {
  std::array<MaskProposal, 3> proposals;
};

struct ImageEmbedding {
  std::string backend_id;
  std::vector<Eigen::Index> shape;
  std::vector<double> values;

  friend bool operator==(const ImageEmbedding&, const ImageEmbedding&) = default;
};

/// 4-connected flood fill from `seed` over pixels within `tolerance` of the
/// seed intensity.
BinaryMask region_grow(const GrayImage& img, Pixel seed, double tolerance);

/// 1 / (1 + perimeter / area); perimeter counts mask-to-outside pixel edges,
/// including the image border.
double compactness_quality(const BinaryMask& mask);

/// Sorts by area (stable) and stamps scale ranks 0, 1, 2.
MaskTriple order_by_area(std::array<MaskProposal, 3> proposals);

/// proposals[scale_index mod 3].
const MaskProposal& select_scale(const MaskTriple& triple, int scale_index);

/// A smart_mask delta over the proposal's set pixels.
LabelDelta accept_mask(const MaskProposal& proposal, std::uint8_t class_id);

/// Promptable mask source. Implementations are immutable after construction
/// and safe to call concurrently.
class SmartLabelBackend {
 public:
  virtual ~SmartLabelBackend() = default;
  virtual std::string id() const = 0;
  virtual ImageEmbedding compute_embedding(const RasterImage& img) const = 0;
  virtual MaskTriple prompt_masks(const ImageEmbedding& embedding, const PromptPoint& point) const = 0;
};

inline constexpr std::array<double, 3> kMockTolerances = {0.05, 0.12, 0.25};

/// Deterministic stand-in: the embedding is the image itself and proposals are
/// region-grown at three tolerances.
class MockBackend final : public SmartLabelBackend {
 public:
  std::string id() const override { return "mock"; }
  ImageEmbedding compute_embedding(const RasterImage& img) const override;
  MaskTriple prompt_masks(const ImageEmbedding& embedding, const PromptPoint& point) const override;
};

/// Encoder/decoder model files in ONNX format. This build carries no model
/// runtime, so every call reports BackendUnavailable with the reason.
class OnnxBackend final : public SmartLabelBackend {
 public:
  OnnxBackend(std::string encoder_path, std::string decoder_path);
  std::string id() const override { return "onnx"; }
  ImageEmbedding compute_embedding(const RasterImage& img) const override;
  MaskTriple prompt_masks(const ImageEmbedding& embedding, const PromptPoint& point) const override;

 private:
  std::string encoder_path_;
  std::string decoder_path_;
};

/// SAMBA_ENCODER_PATH / SAMBA_DECODER_PATH select the ONNX backend; when
/// both are unset the mock backend is used.
std::shared_ptr<const SmartLabelBackend> backend_from_environment();

}  // namespace samba
