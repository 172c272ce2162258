#include "bdff/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace bdff {

namespace {

constexpr uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
  put_u32(out, static_cast<uint32_t>(payload.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uLong crc = crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32(out, static_cast<uint32_t>(crc));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png(const std::string& path, const ImageU8& img) {
  if (img.c != 1 && img.c != 3) {
    throw IoError("write_png: expected 1 or 3 channels, got " + std::to_string(img.c));
  }
  if (img.h <= 0 || img.w <= 0) throw IoError("write_png: empty image");

  // interleave with a filter byte (0 = none) per row
  const size_t stride = static_cast<size_t>(img.w) * img.c;
  std::vector<uint8_t> raw((stride + 1) * img.h);
  size_t pos = 0;
  for (int y = 0; y < img.h; ++y) {
    raw[pos++] = 0;
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < img.c; ++c) raw[pos++] = img.at(c, y, x);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
      Z_OK) {
    throw IoError("write_png: deflate failed for " + path);
  }
  compressed.resize(bound);

  std::vector<uint8_t> file(kSignature, kSignature + 8);
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(img.w));
  put_u32(ihdr, static_cast<uint32_t>(img.h));
  ihdr.push_back(8);                              // bit depth
  ihdr.push_back(img.c == 1 ? 0 : 2);             // color type
  ihdr.push_back(0);                              // compression
  ihdr.push_back(0);                              // filter method
  ihdr.push_back(0);                              // no interlace
  append_chunk(file, "IHDR", ihdr);
  append_chunk(file, "IDAT", compressed);
  append_chunk(file, "IEND", {});

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_png: cannot open " + path);
  os.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
  if (!os) throw IoError("write_png: failed writing " + path);
}

ImageU8 read_png(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_png: cannot open " + path);
  std::vector<uint8_t> file((std::istreambuf_iterator<char>(is)),
                            std::istreambuf_iterator<char>());
  if (file.size() < 8 || std::memcmp(file.data(), kSignature, 8) != 0) {
    throw IoError("read_png: " + path + " is not a PNG file");
  }

  size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  std::vector<uint8_t> idat;
  bool seen_ihdr = false, seen_iend = false;
  while (pos + 8 <= file.size() && !seen_iend) {
    const uint32_t len = get_u32(&file[pos]);
    if (pos + 12 + len > file.size()) throw IoError("read_png: truncated chunk in " + path);
    const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
    const uint8_t* payload = &file[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = static_cast<int>(get_u32(payload));
      height = static_cast<int>(get_u32(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      if (payload[12] != 0) throw IoError("read_png: interlaced PNG not supported: " + path);
      if (bit_depth != 8) {
        throw IoError("read_png: only 8-bit PNG supported, got depth " +
                      std::to_string(bit_depth) + ": " + path);
      }
      if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6) {
        throw IoError("read_png: unsupported color type " + std::to_string(color_type) + ": " +
                      path);
      }
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
    }
    pos += 12 + len;
  }
  if (!seen_ihdr || width <= 0 || height <= 0) throw IoError("read_png: missing IHDR in " + path);

  const int channels = (color_type == 0) ? 1 : (color_type == 2) ? 3 : (color_type == 4) ? 2 : 4;
  const size_t stride = static_cast<size_t>(width) * channels;
  std::vector<uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  const int zrc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
  if (zrc != Z_OK || raw_len != raw.size()) {
    throw IoError("read_png: inflate failed for " + path);
  }

  // undo per-row filters in place
  std::vector<uint8_t> prev(stride, 0);
  ImageU8 out(channels, height, width);
  for (int y = 0; y < height; ++y) {
    const uint8_t filter = raw[y * (stride + 1)];
    uint8_t* row = &raw[y * (stride + 1) + 1];
    const int bpp = channels;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<size_t>(bpp) ? row[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<size_t>(bpp) ? prev[i - bpp] : 0;
      int v = row[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw IoError("read_png: bad filter type in " + path);
      }
      row[i] = static_cast<uint8_t>(v);
    }
    std::memcpy(prev.data(), row, stride);
    for (int x = 0; x < width; ++x)
      for (int ch = 0; ch < channels; ++ch) out.at(ch, y, x) = row[x * channels + ch];
  }
  return out;
}

ImageF read_png_float(const std::string& path) {
  ImageU8 img = read_png(path);
  // drop alpha if present
  if (img.c == 2 || img.c == 4) {
    ImageU8 trimmed(img.c - 1, img.h, img.w);
    for (int c = 0; c < trimmed.c; ++c)
      for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) trimmed.at(c, y, x) = img.at(c, y, x);
    img = std::move(trimmed);
  }
  return to_float(img);
}

}  // namespace bdff
