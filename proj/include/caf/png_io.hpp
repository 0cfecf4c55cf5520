#pragma once

#include <string>

#include "caf/image.hpp"

namespace caf {

// 8-bit RGB PNG round trip. Float values are clamped to [0,1] and quantized
// to 255 levels on write; identical inputs produce byte-identical files.
void write_png(const Image& im, const std::string& path);
Image read_png(const std::string& path);

}  // namespace caf
