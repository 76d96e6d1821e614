#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "samba/feature_stack.hpp"
#include "samba/image.hpp"

namespace samba {

/// Per-pixel class ids for one slice; 0 means unlabelled.
class LabelMap {
 public:
  LabelMap(int width, int height, int slice_index = 0);
  LabelMap(ClassPlane classes, int slice_index = 0);

  int width() const noexcept { return static_cast<int>(classes_.cols()); }
  int height() const noexcept { return static_cast<int>(classes_.rows()); }
  int slice_index() const noexcept { return slice_index_; }
  const ClassPlane& classes() const noexcept { return classes_; }
  ClassPlane& classes() noexcept { return classes_; }
  std::uint8_t operator()(int x, int y) const { return classes_(y, x); }

  std::size_t labelled_count() const { return static_cast<std::size_t>((classes_ != 0).count()); }

  friend bool operator==(const LabelMap& a, const LabelMap& b) {
    return a.slice_index_ == b.slice_index_ && a.classes_.rows() == b.classes_.rows() &&
           a.classes_.cols() == b.classes_.cols() && (a.classes_ == b.classes_).all();
  }

 private:
  ClassPlane classes_;
  int slice_index_;
};

struct Pixel {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

struct Point2 {
  double x = 0;
  double y = 0;
};

enum class DeltaSource { Brush, Polygon, SmartMask, Eraser };

/// A set of pixels (sorted row-major, unique) and what to write to them.
struct LabelDelta {
  std::vector<Pixel> pixels;
  std::uint8_t class_id = 0;
  DeltaSource source = DeltaSource::Brush;
};

/// Sorts row-major and drops duplicates.
void normalize_pixels(std::vector<Pixel>& pixels);

/// Pixels whose centre (integer x, y) lies within `radius` of the polyline,
/// clipped to the image. Throws EmptyPath.
LabelDelta rasterize_brush(std::span<const Point2> path, double radius, std::uint8_t class_id,
                           int width, int height, DeltaSource source = DeltaSource::Brush);

/// Pixels whose centre (x+0.5, y+0.5) is inside under the even-odd rule;
/// centres on an edge count as inside. Collinear vertex sets yield nothing.
/// Throws DegeneratePolygon for fewer than 3 vertices.
LabelDelta rasterize_polygon(std::span<const Point2> vertices, std::uint8_t class_id, int width,
                             int height);

/// Eraser clears; brush/polygon overwrite; smart masks fill only zeros.
/// Throws OutOfBounds when any delta pixel lies outside the map.
LabelMap apply_delta(LabelMap map, const LabelDelta& delta);
void apply_delta_in_place(LabelMap& map, const LabelDelta& delta);

inline constexpr std::size_t kMaxSamplesPerClass = 50'000;
inline constexpr std::uint64_t kSubsampleSeed = 0x5A3BA;

struct TrainingSet {
  FeatureMatrix features;              // one row per sample
  std::vector<std::uint8_t> classes;   // 1..K per row
  std::vector<std::string> feature_names;

  std::size_t size() const noexcept { return classes.size(); }
};

/// One sample per labelled pixel, pooled over slices (`maps[i]` indexes
/// `stacks[maps[i].slice_index()]`). Classes with more than `cap` pixels are
/// subsampled deterministically; kept samples stay in pixel order.
TrainingSet extract_training_set(std::span<const FeatureStack> stacks,
                                 std::span<const LabelMap> maps,
                                 std::size_t cap = kMaxSamplesPerClass);

}  // namespace samba
