#pragma once

#include <cstdint>
#include <vector>

namespace caf {

// Binary mask over an H x W grid, run-length encoded in raster order.
// Runs alternate zero/one and always start with a zero-run (possibly of
// length 0), so `runs[0]` counts leading zeros. Run lengths sum to H * W.
struct RleMask {
  uint32_t height = 0;
  uint32_t width = 0;
  std::vector<uint32_t> runs;

  size_t pixel_count() const;  // number of set bits
  bool empty() const { return runs.empty(); }
};

RleMask rle_encode(const std::vector<uint8_t>& bits, uint32_t height, uint32_t width);
std::vector<uint8_t> rle_decode(const RleMask& mask);

// Validates the alternating-run structure and the H*W total.
bool rle_valid(const RleMask& mask);

}  // namespace caf
