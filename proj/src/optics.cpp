#include "bdff/optics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "bdff/parallel.hpp"

namespace bdff::optics {

double LensConfig::focus_plane_mm() const {
  return 1.0 / (1.0 / focal_mm - 1.0 / sensor_dist_mm);
}

void LensConfig::validate() const {
  if (focal_mm <= 0 || aperture_mm <= 0 || pixel_pitch_mm <= 0) {
    throw ConfigError("lens: focal length, aperture and pixel pitch must be positive");
  }
  if (sensor_dist_mm <= focal_mm) {
    throw ConfigError("lens: sensor distance must exceed the focal length (real image)");
  }
}

void Scene::validate() const {
  if (color.c != 3 || depth_mm.c != 1 || disparity.c != 1 || color.h != depth_mm.h ||
      color.w != depth_mm.w || color.h != disparity.h || color.w != disparity.w) {
    throw ShapeError("scene: color must be 3xHxW with matching 1xHxW depth and disparity");
  }
  for (float d : depth_mm.v) {
    if (!(d > 0.0f) || !std::isfinite(d)) {
      throw DomainError("scene: depth must be finite and positive everywhere");
    }
  }
  for (float d : disparity.v) {
    if (d < 0.0f || d > 1.0f) throw DomainError("scene: disparity must lie in [0,1]");
  }
}

double Scene::min_depth_mm() const {
  return *std::min_element(depth_mm.v.begin(), depth_mm.v.end());
}
double Scene::max_depth_mm() const {
  return *std::max_element(depth_mm.v.begin(), depth_mm.v.end());
}

ImageF normalize_disparity(const ImageF& depth_mm, double z_near_mm, double z_far_mm) {
  ImageF out(1, depth_mm.h, depth_mm.w);
  const double inv_near = 1.0 / z_near_mm, inv_far = 1.0 / z_far_mm;
  const double span = inv_near - inv_far;
  for (size_t i = 0; i < depth_mm.v.size(); ++i) {
    double d = span > 0 ? (1.0 / depth_mm.v[i] - inv_far) / span : 0.0;
    out.v[i] = static_cast<float>(std::clamp(d, 0.0, 1.0));
  }
  return out;
}

double coc_diameter_px(const LensConfig& lens, double z_mm) {
  lens.validate();
  if (z_mm <= lens.focal_mm) {
    throw DomainError("coc_diameter: depth " + std::to_string(z_mm) +
                      " mm does not form a real image (<= focal length)");
  }
  const double zs = lens.focus_plane_mm();
  const double coc_mm =
      lens.sensor_dist_mm * lens.aperture_mm * std::fabs(1.0 / z_mm - 1.0 / zs);
  return coc_mm / lens.pixel_pitch_mm;
}

LensConfig refocus_at(const LensConfig& lens, double focus_mm) {
  if (focus_mm <= lens.focal_mm) {
    throw DomainError("refocus_at: focus depth must exceed the focal length");
  }
  LensConfig out = lens;
  out.sensor_dist_mm = 1.0 / (1.0 / lens.focal_mm - 1.0 / focus_mm);
  return out;
}

double disparity_from_coc(const StereoRig& rig, double coc_px) {
  if (coc_px < 0) throw DomainError("disparity_from_coc: CoC must be nonnegative");
  return coc_px * rig.baseline_mm / rig.lens.aperture_mm;
}

std::vector<double> depth_layers(const Scene& scene, int n, bool* degenerate) {
  if (n < 2) throw ConfigError("depth_layers: need at least 2 layers");
  const double z_near = scene.min_depth_mm();
  const double z_far = scene.max_depth_mm();
  if (degenerate) *degenerate = false;
  std::vector<double> out(n);
  if (!(z_far > z_near)) {
    // constant-depth scene: one layer replicated
    if (degenerate) *degenerate = true;
    std::fill(out.begin(), out.end(), z_near);
    return out;
  }
  const double inv_near = 1.0 / z_near, inv_far = 1.0 / z_far;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);  // normalized disparity
    out[i] = 1.0 / (inv_far + t * (inv_near - inv_far));
  }
  return out;
}

Psf disc_psf(double diameter_px) {
  if (diameter_px < 0) throw DomainError("disc_psf: negative diameter");
  Psf psf;
  if (diameter_px < 1.0) {
    psf.size = 1;
    psf.weights = {1.0f};
    Psf::Row row;
    row.dy = 0;
    row.x0 = row.x1 = 0;
    row.w_full = 1.0f;
    psf.rows.push_back(row);
    return psf;
  }
  const double r = diameter_px / 2.0;
  const int half = static_cast<int>(std::floor(r + 0.375));
  const int k = 2 * half + 1;
  psf.size = k;
  psf.weights.assign(static_cast<size_t>(k) * k, 0.0f);

  // 4x4 sub-pixel coverage sampling; the offset grid is symmetric about the
  // pixel center, which keeps the kernel exactly 4-fold symmetric.
  const double offs[4] = {-0.375, -0.125, 0.125, 0.375};
  double total = 0.0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      int inside = 0;
      for (double sy : offs)
        for (double sx : offs) {
          const double yy = dy + sy, xx = dx + sx;
          if (yy * yy + xx * xx <= r * r) ++inside;
        }
      const double w = inside / 16.0;
      psf.weights[static_cast<size_t>(dy + half) * k + (dx + half)] = static_cast<float>(w);
      total += w;
    }
  }
  for (auto& w : psf.weights) w = static_cast<float>(w / total);

  // row decomposition: a full-weight run plus sparse rim corrections
  const float w_full = *std::max_element(psf.weights.begin(), psf.weights.end());
  for (int dy = -half; dy <= half; ++dy) {
    const float* row = &psf.weights[static_cast<size_t>(dy + half) * k];
    int x0 = k, x1 = -1;
    for (int i = 0; i < k; ++i) {
      if (row[i] != 0.0f) {
        if (i < x0) x0 = i;
        x1 = i;
      }
    }
    if (x1 < 0) continue;  // empty row
    Psf::Row r_out;
    r_out.dy = dy;
    r_out.x0 = x0 - half;
    r_out.x1 = x1 - half;
    r_out.w_full = w_full;
    for (int i = x0; i <= x1; ++i) {
      const float diff = row[i] - w_full;
      if (diff != 0.0f) r_out.corrections.emplace_back(i - half, diff);
    }
    psf.rows.push_back(std::move(r_out));
  }
  return psf;
}

void convolve_psf(const float* src, int h, int w, const Psf& psf, float* dst) {
  if (psf.is_identity()) {
    std::copy_n(src, static_cast<size_t>(h) * w, dst);
    return;
  }
  // per-row prefix sums, zero padding outside the image
  std::vector<double> prefix(static_cast<size_t>(h) * (w + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double acc = 0.0;
    double* p = &prefix[static_cast<size_t>(y) * (w + 1)];
    const float* s = &src[static_cast<size_t>(y) * w];
    p[0] = 0.0;
    for (int x = 0; x < w; ++x) {
      acc += s[x];
      p[x + 1] = acc;
    }
  }
  parallel_for(h, static_cast<int64_t>(h) * w * psf.size * 4, [&](int64_t y) {
    float* out_row = &dst[y * w];
    std::fill(out_row, out_row + w, 0.0f);
    for (const auto& row : psf.rows) {
      const int sy = static_cast<int>(y) + row.dy;
      if (sy < 0 || sy >= h) continue;
      const double* p = &prefix[static_cast<size_t>(sy) * (w + 1)];
      const float* s = &src[static_cast<size_t>(sy) * w];
      for (int x = 0; x < w; ++x) {
        const int lo = std::max(0, x + row.x0);
        const int hi = std::min(w - 1, x + row.x1);
        double acc = hi >= lo ? row.w_full * (p[hi + 1] - p[lo]) : 0.0;
        for (const auto& [dx, wc] : row.corrections) {
          const int sx = x + dx;
          if (sx >= 0 && sx < w) acc += wc * s[sx];
        }
        out_row[x] += static_cast<float>(acc);
      }
    }
  });
}

namespace {

// Extends a layer beyond its visible pixels into regions hidden by nearer
// content so blurred occluders reveal plausible background. Multi-source
// BFS up to `radius`, colors copied from the reached-from pixel.
void extend_layer(const Scene& scene, const std::vector<uint8_t>& visible,
                  const std::vector<uint8_t>& occluded, int radius, std::vector<uint8_t>& mask,
                  ImageF& color) {
  const int h = scene.color.h, w = scene.color.w;
  mask = visible;
  color = ImageF(3, h, w);
  for (int c = 0; c < 3; ++c) {
    const float* src = scene.color.plane(c);
    float* dst = color.plane(c);
    for (int64_t i = 0; i < color.pixels(); ++i) dst[i] = visible[i] ? src[i] : 0.0f;
  }
  std::vector<int> depth(static_cast<size_t>(h) * w, -1);
  std::deque<int> queue;
  for (int i = 0; i < h * w; ++i) {
    if (visible[i]) {
      depth[i] = 0;
      queue.push_back(i);
    }
  }
  const int dyx[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    if (depth[i] >= radius) continue;
    const int y = i / w, x = i % w;
    for (const auto& d : dyx) {
      const int ny = y + d[0], nx = x + d[1];
      if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
      const int ni = ny * w + nx;
      if (depth[ni] >= 0 || !occluded[ni]) continue;
      depth[ni] = depth[i] + 1;
      mask[ni] = 1;
      for (int c = 0; c < 3; ++c) color.plane(c)[ni] = color.plane(c)[i];
      queue.push_back(ni);
    }
  }
}

}  // namespace

ImageF render_refocused(const Scene& scene, const LensConfig& lens, double focus_mm,
                        const RenderParams& params, RenderStats* stats) {
  scene.validate();
  const LensConfig focused = refocus_at(lens, focus_mm);
  const int h = scene.color.h, w = scene.color.w;
  const int64_t n = static_cast<int64_t>(h) * w;
  const int layers = params.n_layers;

  bool degenerate = false;
  const std::vector<double> zs = depth_layers(scene, layers, &degenerate);

  // per-pixel layer assignment by nearest normalized disparity
  std::vector<int> idx(n, 0);
  if (!degenerate) {
    for (int64_t i = 0; i < n; ++i) {
      idx[i] = std::clamp(
          static_cast<int>(std::lround(scene.disparity.v[i] * (layers - 1))), 0, layers - 1);
    }
  }

  // layer CoCs, clipped to the kernel cap
  std::vector<double> coc(layers, 0.0);
  int64_t clamped = 0;
  for (int i = 0; i < layers; ++i) {
    double c = coc_diameter_px(focused, zs[i]);
    if (c > params.max_coc_px) {
      c = params.max_coc_px;
      ++clamped;
    }
    coc[i] = c;
  }
  if (stats) stats->clamped_layers += clamped;

  int ext_radius = 2;
  for (int i = 0; i < layers; ++i) {
    ext_radius = std::max(ext_radius, static_cast<int>(std::ceil(coc[i] / 2.0)) + 2);
  }

  std::vector<int64_t> layer_count(layers, 0);
  for (int64_t i = 0; i < n; ++i) ++layer_count[idx[i]];

  ImageF out(3, h, w);
  std::vector<float> alpha(n, 0.0f);
  std::vector<uint8_t> visible(n), occluded(n), mask;
  ImageF layer_color, blurred(3, h, w);
  std::vector<float> maskf(n), mask_blur(n);

  for (int li = 0; li < layers; ++li) {  // far to near
    if (layer_count[li] == 0) continue;
    for (int64_t i = 0; i < n; ++i) {
      visible[i] = idx[i] == li;
      occluded[i] = idx[i] > li;
    }
    extend_layer(scene, visible, occluded, ext_radius, mask, layer_color);
    for (int64_t i = 0; i < n; ++i) maskf[i] = mask[i];

    const Psf psf = disc_psf(coc[li]);
    convolve_psf(maskf.data(), h, w, psf, mask_blur.data());
    for (int c = 0; c < 3; ++c) {
      // premultiplied color (layer_color is zero outside the mask)
      convolve_psf(layer_color.plane(c), h, w, psf, blurred.plane(c));
    }

    for (int64_t i = 0; i < n; ++i) {
      const float m = mask_blur[i];
      for (int c = 0; c < 3; ++c) {
        out.plane(c)[i] = blurred.plane(c)[i] + (1.0f - m) * out.plane(c)[i];
      }
      alpha[i] = m + (1.0f - m) * alpha[i];
    }
  }

  for (int64_t i = 0; i < n; ++i) {
    const float a = std::max(alpha[i], 1e-6f);
    for (int c = 0; c < 3; ++c) {
      out.plane(c)[i] = std::clamp(out.plane(c)[i] / a, 0.0f, 1.0f);
    }
  }
  if (stats) {
    stats->alpha = ImageF(1, h, w);
    std::copy(alpha.begin(), alpha.end(), stats->alpha.v.begin());
  }
  return out;
}

namespace {

double max_scene_coc(const Scene& scene, const LensConfig& lens,
                     const std::vector<double>& focus_depths) {
  const double z_near = scene.min_depth_mm(), z_far = scene.max_depth_mm();
  double m = 0.0;
  for (double f : focus_depths) {
    const LensConfig focused = refocus_at(lens, f);
    m = std::max(m, coc_diameter_px(focused, z_near));
    m = std::max(m, coc_diameter_px(focused, z_far));
  }
  return m;
}

}  // namespace

FocalStack synth_focal_stack_with(const Scene& scene, const LensConfig& lens,
                                  const std::vector<double>& focus_depths_mm,
                                  double aperture_scale, const RenderParams& params) {
  LensConfig scaled = lens;
  scaled.aperture_mm *= aperture_scale;
  FocalStack stack;
  stack.focus_depths_mm = focus_depths_mm;
  stack.max_coc_px = params.max_coc_px;
  stack.aperture_scale = aperture_scale;
  stack.slices.reserve(focus_depths_mm.size());
  for (double f : focus_depths_mm) {
    stack.slices.push_back(render_refocused(scene, scaled, f, params));
  }
  return stack;
}

FocalStack synth_focal_stack(const Scene& scene, const LensConfig& lens, RandomStream& rng,
                             const RenderParams& params) {
  scene.validate();
  const std::vector<double> zs = depth_layers(scene, params.n_layers);
  const double base = max_scene_coc(scene, lens, zs);
  // one aperture draw per scene; the largest CoC of the stack lands on the
  // target, which never exceeds the kernel cap
  const double target = rng.uniform(params.min_target_coc_px, params.max_coc_px);
  const double scale = base > 1e-12 ? target / base : 1.0;
  return synth_focal_stack_with(scene, lens, zs, scale, params);
}

void add_poisson_noise(ImageF& image, double peak, RandomStream& rng) {
  if (peak <= 0) throw DomainError("add_poisson_noise: peak must be positive");
  for (auto& v : image.v) {
    const double lambda = std::clamp(static_cast<double>(v), 0.0, 1.0) * peak;
    v = static_cast<float>(std::clamp(rng.poisson(lambda) / peak, 0.0, 1.0));
  }
}

}  // namespace bdff::optics
