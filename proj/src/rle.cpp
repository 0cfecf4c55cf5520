#include "caf/rle.hpp"

#include "caf/errors.hpp"

namespace caf {

size_t RleMask::pixel_count() const {
  size_t n = 0;
  for (size_t i = 1; i < runs.size(); i += 2) n += runs[i];
  return n;
}

RleMask rle_encode(const std::vector<uint8_t>& bits, uint32_t height, uint32_t width) {
  require(bits.size() == size_t(height) * width, Errc::shape_mismatch,
          "rle_encode: bit count != H*W");
  RleMask mask;
  mask.height = height;
  mask.width = width;
  uint8_t cur = 0;  // first run counts zeros
  uint32_t len = 0;
  for (uint8_t b : bits) {
    const uint8_t v = b ? 1 : 0;
    if (v == cur) {
      ++len;
    } else {
      mask.runs.push_back(len);
      cur = v;
      len = 1;
    }
  }
  mask.runs.push_back(len);
  return mask;
}

std::vector<uint8_t> rle_decode(const RleMask& mask) {
  require(rle_valid(mask), Errc::invalid_argument, "rle_decode: malformed mask");
  std::vector<uint8_t> bits;
  bits.reserve(size_t(mask.height) * mask.width);
  uint8_t cur = 0;
  for (uint32_t run : mask.runs) {
    for (uint32_t i = 0; i < run; ++i) bits.push_back(cur);
    cur ^= 1;
  }
  return bits;
}

bool rle_valid(const RleMask& mask) {
  uint64_t total = 0;
  for (size_t i = 0; i < mask.runs.size(); ++i) {
    // only the leading zero-run may be empty
    if (i > 0 && mask.runs[i] == 0) return false;
    total += mask.runs[i];
  }
  return total == uint64_t(mask.height) * mask.width;
}

}  // namespace caf
