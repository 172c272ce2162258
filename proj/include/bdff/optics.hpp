#pragma once

#include <vector>

#include "bdff/image.hpp"
#include "bdff/rng.hpp"

namespace bdff::optics {

// Thin lens: z_s = (1/f - 1/s)^-1 is the in-focus plane; a point at depth
// z_p projects to a circle of diameter s*D*|1/z_p - 1/z_s| on the sensor.
struct LensConfig {
  double focal_mm = 50.0;
  double aperture_mm = 10.0;
  double sensor_dist_mm = 51.28;
  double pixel_pitch_mm = 0.01;

  double focus_plane_mm() const;
  void validate() const;
};

// Rectified pair sharing one lens; disparity/CoC ratio is baseline/aperture.
struct StereoRig {
  double baseline_mm = 40.0;
  LensConfig lens;
};

struct Scene {
  ImageF color;      // 3 x H x W in [0,1]
  ImageF depth_mm;   // 1 x H x W, finite and positive
  ImageF disparity;  // 1 x H x W, normalized to [0,1]

  void validate() const;
  double min_depth_mm() const;
  double max_depth_mm() const;
};

// Affine rescale of inverse depth onto [0,1] (1 at z_near, 0 at z_far).
ImageF normalize_disparity(const ImageF& depth_mm, double z_near_mm, double z_far_mm);

struct FocalStack {
  std::vector<ImageF> slices;
  std::vector<double> focus_depths_mm;
  double max_coc_px = 31.0;
  double aperture_scale = 1.0;  // recorded random draw
};

struct RenderParams {
  int n_layers = 16;
  double max_coc_px = 31.0;          // blur-kernel diameter cap
  double min_target_coc_px = 7.0;    // lower bound of the random aperture draw
};

// CoC diameter in pixels at depth z for the lens's own focus plane.
double coc_diameter_px(const LensConfig& lens, double z_mm);

// Same lens moved so the focus plane sits at focus_mm.
LensConfig refocus_at(const LensConfig& lens, double focus_mm);

// d = c * baseline / aperture.
double disparity_from_coc(const StereoRig& rig, double coc_px);

// n focus depths whose normalized disparities are evenly spaced over the
// scene's range. A constant-depth scene yields one depth replicated
// (degenerate flag set).
std::vector<double> depth_layers(const Scene& scene, int n = 16, bool* degenerate = nullptr);

// Discretized disc with an anti-aliased rim (4x4 sub-pixel coverage),
// normalized to sum 1. Rows carry a box + sparse-correction decomposition
// so convolution costs O(k) per pixel instead of O(k^2).
struct Psf {
  int size = 1;                 // odd extent; radius = (size-1)/2
  std::vector<float> weights;   // dense size x size kernel
  struct Row {
    int dy = 0;
    int x0 = 0, x1 = 0;  // inclusive dx range of the full-weight run
    float w_full = 0.0f;
    std::vector<std::pair<int, float>> corrections;  // (dx, weight - w_full)
  };
  std::vector<Row> rows;

  float at(int dy, int dx) const {
    const int r = (size - 1) / 2;
    return weights[static_cast<size_t>(dy + r) * size + (dx + r)];
  }
  bool is_identity() const { return size == 1; }
};

Psf disc_psf(double diameter_px);

// Convolve one plane with the PSF, zero padding outside the image.
void convolve_psf(const float* src, int h, int w, const Psf& psf, float* dst);

struct RenderStats {
  int64_t clamped_layers = 0;  // layer CoCs clipped to the diameter cap
  ImageF alpha;                // accumulated coverage before renormalization
};

// Layered compositing: the scene is split into disparity layers, each
// layer's color and coverage mask (extended behind nearer occluders) are
// blurred by the layer's disc PSF, and layers composite back to front with
// renormalization by accumulated alpha.
ImageF render_refocused(const Scene& scene, const LensConfig& lens, double focus_mm,
                        const RenderParams& params = {}, RenderStats* stats = nullptr);

// 16 slices, one per depth layer; the aperture draw is sampled once per
// scene so the largest CoC lands in [min_target, max] pixels.
FocalStack synth_focal_stack(const Scene& scene, const LensConfig& lens, RandomStream& rng,
                             const RenderParams& params = {});

// Deterministic variant used for the second eye of a rectified pair: both
// stacks must share focus depths and the aperture draw.
FocalStack synth_focal_stack_with(const Scene& scene, const LensConfig& lens,
                                  const std::vector<double>& focus_depths_mm,
                                  double aperture_scale, const RenderParams& params = {});

// v -> Poisson(v * peak) / peak per channel value, clamped to [0,1].
void add_poisson_noise(ImageF& image, double peak, RandomStream& rng);

}  // namespace bdff::optics
