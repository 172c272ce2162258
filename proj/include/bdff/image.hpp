#pragma once

#include <cstdint>
#include <vector>

#include "bdff/errors.hpp"

namespace bdff {

// Channel-planar float image: data[(c*h + y)*w + x]. Color images keep
// values in [0,1]; depth/disparity maps are single-channel.
struct ImageF {
  int c = 0, h = 0, w = 0;
  std::vector<float> v;

  ImageF() = default;
  ImageF(int channels, int height, int width)
      : c(channels), h(height), w(width),
        v(static_cast<size_t>(channels) * height * width, 0.0f) {}

  float& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
  const float& at(int ch, int y, int x) const {
    return v[(static_cast<size_t>(ch) * h + y) * w + x];
  }
  float* plane(int ch) { return &v[static_cast<size_t>(ch) * h * w]; }
  const float* plane(int ch) const { return &v[static_cast<size_t>(ch) * h * w]; }
  int64_t pixels() const { return static_cast<int64_t>(h) * w; }
  bool empty() const { return v.empty(); }
};

struct ImageU8 {
  int c = 0, h = 0, w = 0;
  std::vector<uint8_t> v;  // planar, same layout as ImageF

  ImageU8() = default;
  ImageU8(int channels, int height, int width)
      : c(channels), h(height), w(width),
        v(static_cast<size_t>(channels) * height * width, 0) {}

  uint8_t& at(int ch, int y, int x) { return v[(static_cast<size_t>(ch) * h + y) * w + x]; }
  const uint8_t& at(int ch, int y, int x) const {
    return v[(static_cast<size_t>(ch) * h + y) * w + x];
  }
};

ImageU8 quantize_u8(const ImageF& img);   // round(v*255), clamped
ImageF to_float(const ImageU8& img);      // v/255

ImageF flip_horizontal(const ImageF& img);
ImageF flip_vertical(const ImageF& img);
ImageF crop(const ImageF& img, int y0, int x0, int height, int width);

// Luma plane from a color image (Rec. 601 weights); identity for c==1.
ImageF grayscale(const ImageF& img);

}  // namespace bdff
