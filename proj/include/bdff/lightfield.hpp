#pragma once

#include <string>
#include <vector>

#include "bdff/image.hpp"
#include "bdff/optics.hpp"

namespace bdff::lf {

// U x V grid of sub-aperture images sharing one extent.
struct LightField {
  int u_count = 0, v_count = 0;
  std::vector<ImageF> views;  // v-major: views[v * u_count + u]

  const ImageF& view(int u, int v) const { return views[static_cast<size_t>(v) * u_count + u]; }
  void validate() const;
};

// Average of the sub-aperture images, each sampled with a translation of
// slope * (u - u_center, v - v_center) pixels (bilinear, edge clamp).
// Slope 0 returns the plain average.
ImageF shift_and_add(const LightField& lf, double slope_px);

// One shift-and-add slice per slope; slopes must be ordered.
optics::FocalStack refocus_stack_from_lf(const LightField& lf,
                                         const std::vector<double>& slopes_px);

// Per-pixel, per-slice sharpness: modified Laplacian aggregated over a 9x9
// window on the luma plane.
std::vector<ImageF> focus_measure_maps(const optics::FocalStack& stack);

struct DffResult {
  ImageF layer_index;  // argmax slice per pixel (first maximum wins)
  ImageF confidence;   // (max - second max) / max; 0 when untextured
};

// Depth layer per pixel from the most in-focus slice.
DffResult classical_dff(const optics::FocalStack& stack);

// Descriptor JSON next to pre-decoded sub-aperture PNGs:
//   {"u_count": U, "v_count": V, "pattern": "view_%02d_%02d.png"}
// pattern receives (v, u).
LightField load_light_field(const std::string& descriptor_path);

}  // namespace bdff::lf
