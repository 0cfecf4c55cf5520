#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "caf/errors.hpp"

namespace caf {

// Interleaved RGB float image, values nominally in [0,1].
struct Image {
  uint32_t height = 0;
  uint32_t width = 0;
  std::vector<float> pixels;  // height * width * 3

  Image() = default;
  Image(uint32_t h, uint32_t w) : height(h), width(w), pixels(size_t(h) * w * 3, 0.0f) {}

  float& at(uint32_t y, uint32_t x, uint32_t c) { return pixels[(size_t(y) * width + x) * 3 + c]; }
  const float& at(uint32_t y, uint32_t x, uint32_t c) const {
    return pixels[(size_t(y) * width + x) * 3 + c];
  }
  bool empty() const { return pixels.empty(); }
  size_t size() const { return pixels.size(); }
};

// Rec.601 luma
inline float luma(const Image& im, uint32_t y, uint32_t x) {
  return 0.299f * im.at(y, x, 0) + 0.587f * im.at(y, x, 1) + 0.114f * im.at(y, x, 2);
}

void clamp01(Image& im);

// Box-filter resample of the source rectangle [x0,x1) x [y0,y1) (pixel units,
// may be fractional) onto an out_h x out_w grid. Exact area weighting, so it
// serves both down- and up-sampling deterministically.
Image resample_box(const Image& src, double x0, double y0, double x1, double y1,
                   uint32_t out_h, uint32_t out_w);

// Per-pixel luma plane with an optional box blur of the given radius.
std::vector<float> luma_plane(const Image& im, int blur_radius);

// Drawing helpers for overlays. bbox is [x0,y0,x1,y1) in pixels.
void draw_rect(Image& im, const std::array<float, 4>& bbox, float r, float g, float b,
               int thickness = 2);
void tint_mask(Image& im, const std::vector<uint8_t>& mask_bits, float r, float g, float b,
               float alpha);

}  // namespace caf
