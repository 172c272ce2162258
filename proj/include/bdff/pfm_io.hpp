#pragma once

#include <string>

#include "bdff/image.hpp"

namespace bdff {

// Portable FloatMap: "Pf" grayscale / "PF" color, little-endian (scale -1),
// rows stored bottom to top.
void write_pfm(const std::string& path, const ImageF& img);
ImageF read_pfm(const std::string& path);

}  // namespace bdff
