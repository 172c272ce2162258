#include "bdff/image.hpp"

#include <algorithm>
#include <cmath>

namespace bdff {

ImageU8 quantize_u8(const ImageF& img) {
  ImageU8 out(img.c, img.h, img.w);
  for (size_t i = 0; i < img.v.size(); ++i) {
    const float x = std::clamp(img.v[i], 0.0f, 1.0f);
    out.v[i] = static_cast<uint8_t>(std::lround(x * 255.0f));
  }
  return out;
}

ImageF to_float(const ImageU8& img) {
  ImageF out(img.c, img.h, img.w);
  for (size_t i = 0; i < img.v.size(); ++i) out.v[i] = img.v[i] / 255.0f;
  return out;
}

ImageF flip_horizontal(const ImageF& img) {
  ImageF out(img.c, img.h, img.w);
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(c, y, img.w - 1 - x);
  return out;
}

ImageF flip_vertical(const ImageF& img) {
  ImageF out(img.c, img.h, img.w);
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(c, img.h - 1 - y, x);
  return out;
}

ImageF crop(const ImageF& img, int y0, int x0, int height, int width) {
  if (y0 < 0 || x0 < 0 || y0 + height > img.h || x0 + width > img.w) {
    throw ShapeError("crop: window exceeds image bounds");
  }
  ImageF out(img.c, height, width);
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

ImageF grayscale(const ImageF& img) {
  if (img.c == 1) return img;
  if (img.c < 3) throw ShapeError("grayscale: expected 1 or >=3 channels");
  ImageF out(1, img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      out.at(0, y, x) =
          0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
    }
  return out;
}

}  // namespace bdff
