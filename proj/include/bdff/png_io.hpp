#pragma once

#include <string>

#include "bdff/image.hpp"

namespace bdff {

// 8-bit PNG, no interlace. Writing emits grayscale (1 channel) or RGB
// (3 channels) with a fixed deflate setting so output bytes are a pure
// function of the pixels. Reading accepts gray, gray+alpha, RGB and RGBA.
void write_png(const std::string& path, const ImageU8& img);
ImageU8 read_png(const std::string& path);

inline void write_png(const std::string& path, const ImageF& img) {
  write_png(path, quantize_u8(img));
}
ImageF read_png_float(const std::string& path);

}  // namespace bdff
