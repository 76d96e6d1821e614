#include "samba/labels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "samba/random.hpp"

namespace samba {

namespace {

constexpr double kGeomEps = 1e-9;

double segment_distance_sq(Point2 p, Point2 a, Point2 b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len_sq = dx * dx + dy * dy;
  double t = 0.0;
  if (len_sq > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return ex * ex + ey * ey;
}

}  // namespace

LabelMap::LabelMap(int width, int height, int slice_index)
    : classes_(ClassPlane::Zero(height, width)), slice_index_(slice_index) {
  if (width < 1 || height < 1) throw Error(ErrorCode::DimensionMismatch, "label map must be non-empty");
}

LabelMap::LabelMap(ClassPlane classes, int slice_index)
    : classes_(std::move(classes)), slice_index_(slice_index) {
  if (classes_.rows() < 1 || classes_.cols() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "label map must be non-empty");
  }
}

void normalize_pixels(std::vector<Pixel>& pixels) {
  std::sort(pixels.begin(), pixels.end(),
            [](Pixel a, Pixel b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
}

LabelDelta rasterize_brush(std::span<const Point2> path, double radius, std::uint8_t class_id,
                           int width, int height, DeltaSource source) {
  if (path.empty()) throw Error(ErrorCode::EmptyPath, "brush path is empty");
  radius = std::max(radius, 0.0);
  const double r_sq = radius * radius + kGeomEps;
  LabelDelta delta{{}, source == DeltaSource::Eraser ? std::uint8_t{0} : class_id, source};

  const std::size_t n_segments = path.size() == 1 ? 1 : path.size() - 1;
  for (std::size_t s = 0; s < n_segments; ++s) {
    const Point2 a = path[s];
    const Point2 b = path.size() == 1 ? path[s] : path[s + 1];
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (segment_distance_sq({static_cast<double>(x), static_cast<double>(y)}, a, b) <= r_sq) {
          delta.pixels.push_back({x, y});
        }
      }
    }
  }
  normalize_pixels(delta.pixels);
  return delta;
}

LabelDelta rasterize_polygon(std::span<const Point2> vertices, std::uint8_t class_id, int width,
                             int height) {
  if (vertices.size() < 3) {
    throw Error(ErrorCode::DegeneratePolygon, "polygon needs at least 3 vertices");
  }
  LabelDelta delta{{}, class_id, DeltaSource::Polygon};

  double scale = 0.0;
  for (const auto& v : vertices) scale = std::max({scale, std::abs(v.x), std::abs(v.y), 1.0});
  const Point2 o = vertices[0];
  std::size_t far = 1;
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    if (std::hypot(vertices[i].x - o.x, vertices[i].y - o.y) >
        std::hypot(vertices[far].x - o.x, vertices[far].y - o.y)) {
      far = i;
    }
  }
  bool collinear = true;
  for (const auto& v : vertices) {
    const double cross = (vertices[far].x - o.x) * (v.y - o.y) - (vertices[far].y - o.y) * (v.x - o.x);
    if (std::abs(cross) > kGeomEps * scale * scale) collinear = false;
  }
  if (collinear) return delta;

  double ymin = vertices[0].y, ymax = vertices[0].y;
  for (const auto& v : vertices) {
    ymin = std::min(ymin, v.y);
    ymax = std::max(ymax, v.y);
  }
  const int py0 = std::max(0, static_cast<int>(std::ceil(ymin - 0.5 - kGeomEps)));
  const int py1 = std::min(height - 1, static_cast<int>(std::floor(ymax - 0.5 + kGeomEps)));

  std::vector<double> crossings;
  std::vector<int> on_edge;
  for (int py = py0; py <= py1; ++py) {
    const double yc = py + 0.5;
    crossings.clear();
    on_edge.clear();
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const Point2 a = vertices[i];
      const Point2 b = vertices[(i + 1) % vertices.size()];
      if ((a.y <= yc) != (b.y <= yc)) {
        crossings.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
      // Centres lying exactly on this edge.
      if (std::abs(a.y - b.y) <= kGeomEps) {
        if (std::abs(a.y - yc) <= kGeomEps) {
          const int lo = static_cast<int>(std::ceil(std::min(a.x, b.x) - 0.5 - kGeomEps));
          const int hi = static_cast<int>(std::floor(std::max(a.x, b.x) - 0.5 + kGeomEps));
          for (int px = std::max(lo, 0); px <= std::min(hi, width - 1); ++px) on_edge.push_back(px);
        }
      } else if (yc >= std::min(a.y, b.y) - kGeomEps && yc <= std::max(a.y, b.y) + kGeomEps) {
        const double x = a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y);
        const double px = std::round(x - 0.5);
        if (std::abs(x - 0.5 - px) <= kGeomEps && px >= 0 && px < width) {
          on_edge.push_back(static_cast<int>(px));
        }
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const int lo = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
      const int hi = std::min(width - 1, static_cast<int>(std::floor(crossings[k + 1] - 0.5)));
      for (int px = lo; px <= hi; ++px) delta.pixels.push_back({px, py});
    }
    for (int px : on_edge) delta.pixels.push_back({px, py});
  }
  normalize_pixels(delta.pixels);
  return delta;
}

void apply_delta_in_place(LabelMap& map, const LabelDelta& delta) {
  for (const auto& p : delta.pixels) {
    if (p.x < 0 || p.y < 0 || p.x >= map.width() || p.y >= map.height()) {
      throw Error(ErrorCode::OutOfBounds, "delta pixel outside the label map");
    }
  }
  auto& classes = map.classes();
  for (const auto& p : delta.pixels) {
    auto& cell = classes(p.y, p.x);
    switch (delta.source) {
      case DeltaSource::Eraser: cell = 0; break;
      case DeltaSource::Brush:
      case DeltaSource::Polygon: cell = delta.class_id; break;
      case DeltaSource::SmartMask:
        if (cell == 0) cell = delta.class_id;
        break;
    }
  }
}

LabelMap apply_delta(LabelMap map, const LabelDelta& delta) {
  apply_delta_in_place(map, delta);
  return map;
}

TrainingSet extract_training_set(std::span<const FeatureStack> stacks,
                                 std::span<const LabelMap> maps, std::size_t cap) {
  if (stacks.empty()) throw Error(ErrorCode::DimensionMismatch, "no feature stacks");
  const auto& names = stacks.front().names();
  for (const auto& s : stacks) {
    if (s.names() != names) throw Error(ErrorCode::FeatureMismatch, "stacks disagree on features");
  }

  struct Candidate {
    std::size_t map;
    Eigen::Index pixel;
  };
  std::map<std::uint8_t, std::vector<Candidate>> by_class;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    const auto& map = maps[m];
    if (map.slice_index() < 0 || static_cast<std::size_t>(map.slice_index()) >= stacks.size()) {
      throw Error(ErrorCode::DimensionMismatch, "label map refers to a missing slice");
    }
    const auto& stack = stacks[static_cast<std::size_t>(map.slice_index())];
    if (stack.width() != map.width() || stack.height() != map.height()) {
      throw Error(ErrorCode::DimensionMismatch, "label map and image dimensions differ");
    }
    const auto& c = map.classes();
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (c.data()[i] != 0) by_class[c.data()[i]].push_back({m, i});
    }
  }
  if (by_class.empty()) throw Error(ErrorCode::NoLabels, "no labelled pixels");

  std::vector<Candidate> kept;
  for (auto& [cls, cands] : by_class) {
    if (cands.size() > cap) {
      SplitMix64 rng(kSubsampleSeed, cls);
      std::vector<std::size_t> order(cands.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = 0; i < cap; ++i) {
        std::swap(order[i], order[i + rng.below(order.size() - i)]);
      }
      order.resize(cap);
      std::sort(order.begin(), order.end());
      std::vector<Candidate> chosen;
      chosen.reserve(cap);
      for (std::size_t i : order) chosen.push_back(cands[i]);
      cands = std::move(chosen);
    }
    kept.insert(kept.end(), cands.begin(), cands.end());
  }
  std::sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
    return a.map != b.map ? a.map < b.map : a.pixel < b.pixel;
  });

  TrainingSet ts;
  ts.feature_names = names;
  ts.features.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(names.size()));
  ts.classes.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& map = maps[kept[i].map];
    const auto& stack = stacks[static_cast<std::size_t>(map.slice_index())];
    ts.features.row(static_cast<Eigen::Index>(i)) = stack.data().row(kept[i].pixel);
    ts.classes.push_back(map.classes().data()[kept[i].pixel]);
  }
  return ts;
}

}  // namespace samba
