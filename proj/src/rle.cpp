#include "samba/rle.hpp"

namespace samba {

RleMask encode_rle(const BinaryMask& mask) {
  RleMask rle{static_cast<int>(mask.cols()), static_cast<int>(mask.rows()), {}};
  const std::uint64_t n = static_cast<std::uint64_t>(mask.size());
  const std::uint8_t* d = mask.data();
  std::uint64_t i = 0;
  while (i < n) {
    if (!d[i]) {
      ++i;
      continue;
    }
    const std::uint64_t start = i;
    while (i < n && d[i]) ++i;
    rle.runs.emplace_back(start, i - start);
  }
  return rle;
}

BinaryMask decode_rle(const RleMask& rle) {
  if (rle.width < 1 || rle.height < 1) throw Error(ErrorCode::MalformedFile, "RLE mask has no area");
  BinaryMask mask = BinaryMask::Zero(rle.height, rle.width);
  const std::uint64_t n = static_cast<std::uint64_t>(mask.size());
  std::uint64_t next_free = 0;
  for (const auto& [start, length] : rle.runs) {
    if (length == 0 || start < next_free || start > n || length > n - start) {
      throw Error(ErrorCode::MalformedFile, "RLE runs unsorted, overlapping or out of range");
    }
    std::fill_n(mask.data() + start, length, std::uint8_t{1});
    next_free = start + length;
  }
  return mask;
}

}  // namespace samba
