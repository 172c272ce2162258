#include "bdff/pfm_io.hpp"

#include <fstream>
#include <sstream>

namespace bdff {

void write_pfm(const std::string& path, const ImageF& img) {
  if (img.c != 1 && img.c != 3) {
    throw IoError("write_pfm: expected 1 or 3 channels, got " + std::to_string(img.c));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_pfm: cannot open " + path);
  os << (img.c == 1 ? "Pf" : "PF") << "\n" << img.w << " " << img.h << "\n" << -1.0 << "\n";
  std::vector<float> row(static_cast<size_t>(img.w) * img.c);
  for (int y = img.h - 1; y >= 0; --y) {
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < img.c; ++c) row[x * img.c + c] = img.at(c, y, x);
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!os) throw IoError("write_pfm: failed writing " + path);
}

ImageF read_pfm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_pfm: cannot open " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  is >> magic >> w >> h >> scale;
  if ((magic != "Pf" && magic != "PF") || w <= 0 || h <= 0) {
    throw IoError("read_pfm: bad header in " + path);
  }
  if (scale >= 0) throw IoError("read_pfm: big-endian PFM not supported: " + path);
  is.get();  // single whitespace after the scale line
  const int c = magic == "Pf" ? 1 : 3;
  ImageF out(c, h, w);
  std::vector<float> row(static_cast<size_t>(w) * c);
  for (int y = h - 1; y >= 0; --y) {
    if (!is.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(float)))) {
      throw IoError("read_pfm: truncated data in " + path);
    }
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) = row[x * c + ch];
  }
  return out;
}

}  // namespace bdff
