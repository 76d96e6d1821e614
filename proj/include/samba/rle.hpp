#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "samba/smart_label.hpp"

namespace samba {

/// Row-major runs of set pixels, sorted by start, non-overlapping and inside
/// width * height. The encoder always merges touching runs.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> runs;  // (start, length)

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask encode_rle(const BinaryMask& mask);

/// Throws MalformedFile when the runs break the ordering or bounds rules.
BinaryMask decode_rle(const RleMask& rle);

}  // namespace samba
