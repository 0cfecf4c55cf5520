#include "caf/image.hpp"

#include <algorithm>
#include <cmath>

namespace caf {

void clamp01(Image& im) {
  for (float& v : im.pixels) v = std::min(1.0f, std::max(0.0f, v));
}

Image resample_box(const Image& src, double x0, double y0, double x1, double y1,
                   uint32_t out_h, uint32_t out_w) {
  require(x1 > x0 && y1 > y0, Errc::invalid_argument, "resample: empty source rect");
  require(out_h > 0 && out_w > 0, Errc::invalid_argument, "resample: empty target");
  Image out(out_h, out_w);
  const double cell_w = (x1 - x0) / out_w;
  const double cell_h = (y1 - y0) / out_h;
  for (uint32_t oy = 0; oy < out_h; ++oy) {
    const double sy0 = y0 + oy * cell_h;
    const double sy1 = sy0 + cell_h;
    const int py0 = std::max(0, int(std::floor(sy0)));
    const int py1 = std::min(int(src.height), int(std::ceil(sy1)));
    for (uint32_t ox = 0; ox < out_w; ++ox) {
      const double sx0 = x0 + ox * cell_w;
      const double sx1 = sx0 + cell_w;
      const int px0 = std::max(0, int(std::floor(sx0)));
      const int px1 = std::min(int(src.width), int(std::ceil(sx1)));
      double acc[3] = {0, 0, 0};
      double wsum = 0;
      for (int py = py0; py < py1; ++py) {
        const double wy = std::min(sy1, double(py + 1)) - std::max(sy0, double(py));
        if (wy <= 0) continue;
        for (int px = px0; px < px1; ++px) {
          const double wx = std::min(sx1, double(px + 1)) - std::max(sx0, double(px));
          if (wx <= 0) continue;
          const double w = wx * wy;
          for (int c = 0; c < 3; ++c)
            acc[c] += w * src.at(uint32_t(py), uint32_t(px), uint32_t(c));
          wsum += w;
        }
      }
      for (int c = 0; c < 3; ++c)
        out.at(oy, ox, uint32_t(c)) = wsum > 0 ? float(acc[c] / wsum) : 0.0f;
    }
  }
  return out;
}

std::vector<float> luma_plane(const Image& im, int blur_radius) {
  const uint32_t h = im.height, w = im.width;
  std::vector<float> plane(size_t(h) * w);
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x) plane[size_t(y) * w + x] = luma(im, y, x);
  if (blur_radius <= 0) return plane;
  std::vector<float> blurred(plane.size());
  const int r = blur_radius;
  for (int y = 0; y < int(h); ++y)
    for (int x = 0; x < int(w); ++x) {
      float acc = 0.0f;
      int count = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= int(h) || xx < 0 || xx >= int(w)) continue;
          acc += plane[size_t(yy) * w + xx];
          ++count;
        }
      blurred[size_t(y) * w + x] = acc / float(count);
    }
  return blurred;
}

void draw_rect(Image& im, const std::array<float, 4>& bbox, float r, float g, float b,
               int thickness) {
  const int x0 = int(std::lround(bbox[0])), y0 = int(std::lround(bbox[1]));
  const int x1 = int(std::lround(bbox[2])), y1 = int(std::lround(bbox[3]));
  auto set = [&](int y, int x) {
    if (y < 0 || y >= int(im.height) || x < 0 || x >= int(im.width)) return;
    im.at(uint32_t(y), uint32_t(x), 0) = r;
    im.at(uint32_t(y), uint32_t(x), 1) = g;
    im.at(uint32_t(y), uint32_t(x), 2) = b;
  };
  for (int t = 0; t < thickness; ++t) {
    for (int x = x0 - t; x < x1 + t; ++x) {
      set(y0 - t, x);
      set(y1 - 1 + t, x);
    }
    for (int y = y0 - t; y < y1 + t; ++y) {
      set(y, x0 - t);
      set(y, x1 - 1 + t);
    }
  }
}

void tint_mask(Image& im, const std::vector<uint8_t>& mask_bits, float r, float g, float b,
               float alpha) {
  require(mask_bits.size() == size_t(im.height) * im.width, Errc::shape_mismatch,
          "tint_mask: mask/image size mismatch");
  for (uint32_t y = 0; y < im.height; ++y)
    for (uint32_t x = 0; x < im.width; ++x) {
      if (!mask_bits[size_t(y) * im.width + x]) continue;
      im.at(y, x, 0) = (1 - alpha) * im.at(y, x, 0) + alpha * r;
      im.at(y, x, 1) = (1 - alpha) * im.at(y, x, 1) + alpha * g;
      im.at(y, x, 2) = (1 - alpha) * im.at(y, x, 2) + alpha * b;
    }
}

}  // namespace caf
