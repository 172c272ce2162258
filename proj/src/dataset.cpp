#include "bdff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "bdff/pfm_io.hpp"
#include "bdff/png_io.hpp"

namespace bdff::data {

namespace fs = std::filesystem;
using optics::LensConfig;
using optics::Scene;
using optics::StereoRig;

void SceneSpec::validate() const {
  if (width < 8 || height < 8 || width % 8 != 0 || height % 8 != 0) {
    throw ConfigError("scene spec: extents must be multiples of 8, got " +
                      std::to_string(width) + "x" + std::to_string(height));
  }
  if (n_objects < 0) throw ConfigError("scene spec: negative object count");
  if (!(z_near_mm > 0) || !(z_far_mm > z_near_mm)) {
    throw ConfigError("scene spec: need 0 < z_near < z_far");
  }
  if (!(max_disparity_px > 0) || max_disparity_px >= 100.0) {
    throw ConfigError("scene spec: max disparity must lie in (0, 100) px");
  }
  if (n_layers < 2) throw ConfigError("scene spec: need at least 2 layers");
  const double step = max_disparity_px / (n_layers - 1);
  if (std::fabs(step - std::round(step)) > 1e-9) {
    throw ConfigError("scene spec: max disparity must be a multiple of n_layers-1 so layer "
                      "shifts are whole pixels");
  }
}

namespace {

// value noise: bilinear interpolation of hashed lattice values
double lattice(uint64_t seed, int ix, int iy) {
  const uint64_t h = mix_seed(seed ^ (static_cast<uint64_t>(ix) * 0x9e3779b97f4a7c15ull) ^
                              (static_cast<uint64_t>(iy) * 0xc2b2ae3d27d4eb4full));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(uint64_t seed, double x, double y, double scale) {
  const double u = x / scale, v = y / scale;
  const int ix = static_cast<int>(std::floor(u)), iy = static_cast<int>(std::floor(v));
  const double fx = u - ix, fy = v - iy;
  const double sx = fx * fx * (3 - 2 * fx), sy = fy * fy * (3 - 2 * fy);
  const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
  return (a * (1 - sx) + b * sx) * (1 - sy) + (c * (1 - sx) + d * sx) * sy;
}

struct TextureSpec {
  int kind = 0;  // 0 checker, 1 stripes, 2 value noise
  double scale = 6.0;
  double phase_x = 0.0, phase_y = 0.0;
  uint64_t noise_seed = 0;
  float color_a[3] = {0, 0, 0};
  float color_b[3] = {1, 1, 1};

  void sample(double u, double v, float out[3]) const {
    double t = 0.0;
    switch (kind) {
      case 0: {
        const int cu = static_cast<int>(std::floor((u + phase_x) / scale));
        const int cv = static_cast<int>(std::floor((v + phase_y) / scale));
        t = ((cu + cv) & 1) ? 1.0 : 0.0;
        break;
      }
      case 1: {
        const int cu = static_cast<int>(std::floor((u + phase_x) / scale));
        t = (cu & 1) ? 1.0 : 0.0;
        break;
      }
      default:
        t = value_noise(noise_seed, u + phase_x, v + phase_y, scale);
        break;
    }
    for (int c = 0; c < 3; ++c) {
      out[c] = static_cast<float>(color_a[c] * (1.0 - t) + color_b[c] * t);
    }
  }
};

struct ObjectSpec {
  bool ellipse = false;
  int layer = 1;          // disparity grid index, 1..n_layers-1
  double cx = 0, cy = 0;  // left-view center, snapped to 1/16 px
  double half_w = 0, half_h = 0;
  int disparity_px = 0;  // whole pixels
  TextureSpec tex;

  bool contains(double u, double v) const {
    if (ellipse) {
      const double a = u / half_w, b = v / half_h;
      return a * a + b * b <= 1.0;
    }
    return std::fabs(u) <= half_w && std::fabs(v) <= half_h;
  }
};

double snap16(double v) { return std::round(v * 16.0) / 16.0; }

TextureSpec random_texture(RandomStream& rng, double min_scale, double max_scale) {
  TextureSpec t;
  t.kind = static_cast<int>(rng.uniform_int(0, 2));
  t.scale = snap16(rng.uniform(min_scale, max_scale));
  t.phase_x = snap16(rng.uniform(0.0, 64.0));
  t.phase_y = snap16(rng.uniform(0.0, 64.0));
  t.noise_seed = rng.next_u64();
  // contrasty color pair
  for (int c = 0; c < 3; ++c) t.color_a[c] = static_cast<float>(rng.uniform(0.0, 0.35));
  for (int c = 0; c < 3; ++c) t.color_b[c] = static_cast<float>(rng.uniform(0.65, 1.0));
  return t;
}

double layer_depth(const SceneSpec& spec, int layer) {
  const double inv_near = 1.0 / spec.z_near_mm, inv_far = 1.0 / spec.z_far_mm;
  const double t = static_cast<double>(layer) / (spec.n_layers - 1);
  return 1.0 / (inv_far + t * (inv_near - inv_far));
}

}  // namespace

double rig_disparity_px(const SceneSpec& spec, double z_mm) {
  const double t =
      (1.0 / z_mm - 1.0 / spec.z_far_mm) / (1.0 / spec.z_near_mm - 1.0 / spec.z_far_mm);
  return t * spec.max_disparity_px;
}

StereoRig rig_for(const SceneSpec& spec, const LensConfig& lens) {
  lens.validate();
  StereoRig rig;
  rig.lens = lens;
  // converged on the far plane: d(z) = l * s * (1/z - 1/z_far) / pitch
  const double span = 1.0 / spec.z_near_mm - 1.0 / spec.z_far_mm;
  rig.baseline_mm = spec.max_disparity_px * lens.pixel_pitch_mm / (lens.sensor_dist_mm * span);
  return rig;
}

ScenePair gen_scene(const SceneSpec& spec) {
  spec.validate();
  RandomStream rng(spec.seed, "scene");

  std::vector<ObjectSpec> objects;
  objects.reserve(spec.n_objects);
  const double min_half = spec.width / 12.0, max_half = spec.width / 5.0;
  for (int k = 0; k < spec.n_objects; ++k) {
    ObjectSpec o;
    // the first object pins the nearest layer so disparity spans [0,1]
    o.layer = (k == 0) ? spec.n_layers - 1
                       : static_cast<int>(rng.uniform_int(1, spec.n_layers - 1));
    o.ellipse = rng.uniform() < 0.5;
    o.cx = snap16(rng.uniform(spec.width * 0.2, spec.width * 0.8));
    o.cy = snap16(rng.uniform(spec.height * 0.2, spec.height * 0.8));
    o.half_w = snap16(rng.uniform(min_half, max_half));
    o.half_h = snap16(rng.uniform(min_half, max_half));
    o.disparity_px = static_cast<int>(std::lround(rig_disparity_px(
        spec, layer_depth(spec, o.layer))));
    o.tex = random_texture(rng, 3.0, 10.0);
    objects.push_back(o);
  }
  // far to near so nearer objects paint over
  std::stable_sort(objects.begin(), objects.end(),
                   [](const ObjectSpec& a, const ObjectSpec& b) { return a.layer < b.layer; });

  TextureSpec backdrop = random_texture(rng, 4.0, 12.0);

  ScenePair pair;
  pair.background_only = objects.empty();

  auto paint = [&](bool right_view, Scene& scene, ImageF& ids) {
    scene.color = ImageF(3, spec.height, spec.width);
    scene.depth_mm = ImageF(1, spec.height, spec.width);
    scene.disparity = ImageF(1, spec.height, spec.width);
    ids = ImageF(1, spec.height, spec.width);
    const int border = 4;  // backdrop ring keeps the far layer occupied
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        float rgb[3];
        backdrop.sample(x, y, rgb);  // far plane is converged: zero disparity
        double depth = spec.z_far_mm;
        float disp = 0.0f;
        float id = 0.0f;
        if (y >= border && y < spec.height - border && x >= border &&
            x < spec.width - border) {
          for (size_t k = 0; k < objects.size(); ++k) {
            const ObjectSpec& o = objects[k];
            const double cx = right_view ? o.cx - o.disparity_px : o.cx;
            const double u = x - cx, v = y - o.cy;
            if (!o.contains(u, v)) continue;
            o.tex.sample(u, v, rgb);
            depth = layer_depth(spec, o.layer);
            disp = static_cast<float>(o.layer) / (spec.n_layers - 1);
            id = static_cast<float>(k + 1);
          }
        }
        for (int c = 0; c < 3; ++c) scene.color.at(c, y, x) = rgb[c];
        scene.depth_mm.at(0, y, x) = static_cast<float>(depth);
        scene.disparity.at(0, y, x) = disp;
        ids.at(0, y, x) = id;
      }
    }
  };

  paint(false, pair.left, pair.left_ids);
  paint(true, pair.right, pair.right_ids);
  pair.left.validate();
  pair.right.validate();
  return pair;
}

nlohmann::json SampleMeta::to_json() const {
  return {{"seed", seed},
          {"aperture_scale", aperture_scale},
          {"noise_peak", noise_peak},
          {"baseline_mm", baseline_mm},
          {"focus_depths_mm", focus_depths_mm}};
}

SamplePair build_sample(const ScenePair& pair, const StereoRig& rig, RandomStream& rng,
                        const BuildParams& params) {
  const std::vector<double> layers =
      optics::depth_layers(pair.left, params.render.n_layers);

  // one aperture draw per stereo pair
  double base = 0.0;
  for (double f : layers) {
    const LensConfig focused = optics::refocus_at(rig.lens, f);
    base = std::max(base, optics::coc_diameter_px(focused, pair.left.min_depth_mm()));
    base = std::max(base, optics::coc_diameter_px(focused, pair.left.max_depth_mm()));
  }
  const double target = rng.uniform(params.render.min_target_coc_px, params.render.max_coc_px);
  const double scale = base > 1e-12 ? target / base : 1.0;

  SamplePair out;
  out.left_stack = optics::synth_focal_stack_with(pair.left, rig.lens, layers, scale,
                                                  params.render);
  out.right_stack = optics::synth_focal_stack_with(pair.right, rig.lens, layers, scale,
                                                   params.render);
  if (params.noise_peak > 0) {
    for (size_t i = 0; i < out.left_stack.slices.size(); ++i) {
      RandomStream r = rng.fork("noise_left_" + std::to_string(i));
      optics::add_poisson_noise(out.left_stack.slices[i], params.noise_peak, r);
    }
    for (size_t i = 0; i < out.right_stack.slices.size(); ++i) {
      RandomStream r = rng.fork("noise_right_" + std::to_string(i));
      optics::add_poisson_noise(out.right_stack.slices[i], params.noise_peak, r);
    }
  }
  out.gt_color = pair.left.color;
  out.gt_disparity = pair.left.disparity;
  out.gt_disparity_right = pair.right.disparity;
  out.meta.aperture_scale = scale;
  out.meta.noise_peak = std::max(params.noise_peak, 0.0);
  out.meta.baseline_mm = rig.baseline_mm;
  out.meta.focus_depths_mm = layers;
  return out;
}

// --------------------------------------------------------------------------
// Patch sampling
// --------------------------------------------------------------------------

namespace {

void copy_stack_patch(const optics::FocalStack& stack, int y0, int x0, int p, bool hflip,
                      bool vflip, Tensor& dst) {
  const int slices = static_cast<int>(stack.slices.size());
  dst = Tensor({1, slices * 3, p, p});
  for (int s = 0; s < slices; ++s) {
    const ImageF& img = stack.slices[s];
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < p; ++y) {
        const int sy = vflip ? y0 + p - 1 - y : y0 + y;
        for (int x = 0; x < p; ++x) {
          const int sx = hflip ? x0 + p - 1 - x : x0 + x;
          dst.at4(0, s * 3 + c, y, x) = img.at(c, sy, sx);
        }
      }
    }
  }
}

Tensor copy_plane_patch(const ImageF& img, int y0, int x0, int p, bool hflip, bool vflip) {
  Tensor dst({1, img.c, p, p});
  for (int c = 0; c < img.c; ++c) {
    for (int y = 0; y < p; ++y) {
      const int sy = vflip ? y0 + p - 1 - y : y0 + y;
      for (int x = 0; x < p; ++x) {
        const int sx = hflip ? x0 + p - 1 - x : x0 + x;
        dst.at4(0, c, y, x) = img.at(c, sy, sx);
      }
    }
  }
  return dst;
}

}  // namespace

PatchExample extract_patch(const SamplePair& sample, PatchTarget target, int p, int y0, int x0,
                           bool hflip, bool vflip) {
  const int h = sample.gt_disparity.h, w = sample.gt_disparity.w;
  if (p > h || p > w || y0 < 0 || x0 < 0 || y0 + p > h || x0 + p > w) {
    throw ShapeError("patch " + std::to_string(p) + " at (" + std::to_string(y0) + "," +
                     std::to_string(x0) + ") exceeds image " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  PatchExample ex;
  ex.y0 = y0;
  ex.x0 = x0;
  ex.hflip = hflip;
  ex.vflip = vflip;
  if (target == PatchTarget::Focus) {
    copy_stack_patch(sample.left_stack, y0, x0, p, hflip, vflip, ex.left);
    ex.target_disparity = copy_plane_patch(sample.gt_disparity, y0, x0, p, hflip, vflip);
    ex.target_color = copy_plane_patch(sample.gt_color, y0, x0, p, hflip, vflip);
  } else {
    // a horizontal flip of a rectified pair swaps the eyes; ground truth is
    // then the (flipped) right-view disparity
    if (hflip) {
      copy_stack_patch(sample.right_stack, y0, x0, p, true, vflip, ex.left);
      copy_stack_patch(sample.left_stack, y0, x0, p, true, vflip, ex.right);
      ex.target_disparity = copy_plane_patch(sample.gt_disparity_right, y0, x0, p, true, vflip);
    } else {
      copy_stack_patch(sample.left_stack, y0, x0, p, false, vflip, ex.left);
      copy_stack_patch(sample.right_stack, y0, x0, p, false, vflip, ex.right);
      ex.target_disparity = copy_plane_patch(sample.gt_disparity, y0, x0, p, false, vflip);
    }
  }
  return ex;
}

PatchExample sample_patch(const SamplePair& sample, PatchTarget target, RandomStream& rng,
                          int patch_size) {
  const int h = sample.gt_disparity.h, w = sample.gt_disparity.w;
  if (patch_size > h || patch_size > w) {
    throw ShapeError("patch size " + std::to_string(patch_size) + " exceeds image " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const int y0 = static_cast<int>(rng.uniform_int(0, h - patch_size));
  const int x0 = static_cast<int>(rng.uniform_int(0, w - patch_size));
  const bool hflip = rng.uniform() < 0.5;
  const bool vflip = rng.uniform() < 0.5;
  return extract_patch(sample, target, patch_size, y0, x0, hflip, vflip);
}

ImageF crop_to_multiple_of_8(const ImageF& image) {
  if (image.h < 8 || image.w < 8) {
    throw ShapeError("crop_to_multiple_of_8: image smaller than 8x8");
  }
  const int h = image.h - image.h % 8;
  const int w = image.w - image.w % 8;
  if (h == image.h && w == image.w) return image;
  return crop(image, 0, 0, h, w);
}

// --------------------------------------------------------------------------
// Disk format
// --------------------------------------------------------------------------

nlohmann::json DatasetConfig::to_json() const {
  return {{"seed", seed},
          {"train_count", train_count},
          {"test_count", test_count},
          {"scene",
           {{"width", scene.width},
            {"height", scene.height},
            {"n_objects", scene.n_objects},
            {"z_near_mm", scene.z_near_mm},
            {"z_far_mm", scene.z_far_mm},
            {"max_disparity_px", scene.max_disparity_px},
            {"n_layers", scene.n_layers}}},
          {"build",
           {{"n_layers", build.render.n_layers},
            {"max_coc_px", build.render.max_coc_px},
            {"min_target_coc_px", build.render.min_target_coc_px},
            {"noise_peak", build.noise_peak}}},
          {"lens",
           {{"focal_mm", lens.focal_mm},
            {"aperture_mm", lens.aperture_mm},
            {"sensor_dist_mm", lens.sensor_dist_mm},
            {"pixel_pitch_mm", lens.pixel_pitch_mm}}}};
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
  DatasetConfig c;
  c.seed = j.value("seed", c.seed);
  c.train_count = j.value("train_count", c.train_count);
  c.test_count = j.value("test_count", c.test_count);
  if (j.contains("scene")) {
    const auto& s = j["scene"];
    c.scene.width = s.value("width", c.scene.width);
    c.scene.height = s.value("height", c.scene.height);
    c.scene.n_objects = s.value("n_objects", c.scene.n_objects);
    c.scene.z_near_mm = s.value("z_near_mm", c.scene.z_near_mm);
    c.scene.z_far_mm = s.value("z_far_mm", c.scene.z_far_mm);
    c.scene.max_disparity_px = s.value("max_disparity_px", c.scene.max_disparity_px);
    c.scene.n_layers = s.value("n_layers", c.scene.n_layers);
  }
  if (j.contains("build")) {
    const auto& b = j["build"];
    c.build.render.n_layers = b.value("n_layers", c.build.render.n_layers);
    c.build.render.max_coc_px = b.value("max_coc_px", c.build.render.max_coc_px);
    c.build.render.min_target_coc_px =
        b.value("min_target_coc_px", c.build.render.min_target_coc_px);
    c.build.noise_peak = b.value("noise_peak", c.build.noise_peak);
  }
  if (j.contains("lens")) {
    const auto& l = j["lens"];
    c.lens.focal_mm = l.value("focal_mm", c.lens.focal_mm);
    c.lens.aperture_mm = l.value("aperture_mm", c.lens.aperture_mm);
    c.lens.sensor_dist_mm = l.value("sensor_dist_mm", c.lens.sensor_dist_mm);
    c.lens.pixel_pitch_mm = l.value("pixel_pitch_mm", c.lens.pixel_pitch_mm);
  }
  return c;
}

std::string config_hash_of(const nlohmann::json& config) {
  const uint64_t h = hash_name(config.dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string Manifest::sample_dir(const std::string& id) const {
  return (fs::path(root) / "samples" / id).string();
}

void save_sample(const SamplePair& sample, const std::string& dir) {
  fs::create_directories(dir);
  auto slice_name = [](const char* eye, size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%02zu.png", eye, i);
    return std::string(buf);
  };
  for (size_t i = 0; i < sample.left_stack.slices.size(); ++i) {
    write_png((fs::path(dir) / slice_name("left", i)).string(), sample.left_stack.slices[i]);
  }
  for (size_t i = 0; i < sample.right_stack.slices.size(); ++i) {
    write_png((fs::path(dir) / slice_name("right", i)).string(), sample.right_stack.slices[i]);
  }
  write_png((fs::path(dir) / "gt_color.png").string(), sample.gt_color);
  write_pfm((fs::path(dir) / "gt_disparity.pfm").string(), sample.gt_disparity);
  write_pfm((fs::path(dir) / "gt_disparity_right.pfm").string(), sample.gt_disparity_right);

  nlohmann::json meta = sample.meta.to_json();
  meta["slices"] = sample.left_stack.slices.size();
  meta["max_coc_px"] = sample.left_stack.max_coc_px;
  std::ofstream os(fs::path(dir) / "meta.json");
  os << meta.dump(2) << "\n";
  if (!os) throw IoError("failed writing sample meta in " + dir);
}

SamplePair load_sample(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "meta.json");
  if (!is) throw IoError("missing meta.json in " + dir);
  nlohmann::json meta = nlohmann::json::parse(is);
  const size_t slices = meta.at("slices").get<size_t>();

  SamplePair out;
  auto load_stack = [&](const char* eye, optics::FocalStack& stack) {
    stack.slices.clear();
    for (size_t i = 0; i < slices; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s_%02zu.png", eye, i);
      stack.slices.push_back(read_png_float((fs::path(dir) / buf).string()));
    }
    stack.focus_depths_mm = meta.at("focus_depths_mm").get<std::vector<double>>();
    stack.max_coc_px = meta.value("max_coc_px", 31.0);
    stack.aperture_scale = meta.value("aperture_scale", 1.0);
  };
  load_stack("left", out.left_stack);
  load_stack("right", out.right_stack);
  out.gt_color = read_png_float((fs::path(dir) / "gt_color.png").string());
  out.gt_disparity = read_pfm((fs::path(dir) / "gt_disparity.pfm").string());
  out.gt_disparity_right = read_pfm((fs::path(dir) / "gt_disparity_right.pfm").string());
  out.meta.seed = meta.value("seed", 0ull);
  out.meta.aperture_scale = meta.value("aperture_scale", 1.0);
  out.meta.noise_peak = meta.value("noise_peak", 0.0);
  out.meta.baseline_mm = meta.value("baseline_mm", 0.0);
  out.meta.focus_depths_mm = meta.at("focus_depths_mm").get<std::vector<double>>();
  return out;
}

CompactSample load_compact_sample(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "meta.json");
  if (!is) throw IoError("missing meta.json in " + dir);
  nlohmann::json meta = nlohmann::json::parse(is);
  const size_t slices = meta.at("slices").get<size_t>();
  CompactSample out;
  for (size_t i = 0; i < slices; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "left_%02zu.png", i);
    out.left_slices.push_back(read_png((fs::path(dir) / buf).string()));
    std::snprintf(buf, sizeof(buf), "right_%02zu.png", i);
    out.right_slices.push_back(read_png((fs::path(dir) / buf).string()));
  }
  out.gt_color = read_png((fs::path(dir) / "gt_color.png").string());
  out.gt_disparity = read_pfm((fs::path(dir) / "gt_disparity.pfm").string());
  out.gt_disparity_right = read_pfm((fs::path(dir) / "gt_disparity_right.pfm").string());
  out.focus_depths_mm = meta.at("focus_depths_mm").get<std::vector<double>>();
  return out;
}

namespace {

void copy_compact_stack_patch(const std::vector<ImageU8>& slices, int y0, int x0, int p,
                              bool hflip, bool vflip, Tensor& dst) {
  const int n = static_cast<int>(slices.size());
  dst = Tensor({1, n * 3, p, p});
  constexpr float kInv = 1.0f / 255.0f;
  for (int s = 0; s < n; ++s) {
    const ImageU8& img = slices[s];
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < p; ++y) {
        const int sy = vflip ? y0 + p - 1 - y : y0 + y;
        for (int x = 0; x < p; ++x) {
          const int sx = hflip ? x0 + p - 1 - x : x0 + x;
          dst.at4(0, s * 3 + c, y, x) = img.at(c, sy, sx) * kInv;
        }
      }
    }
  }
}

}  // namespace

PatchExample extract_patch(const CompactSample& sample, PatchTarget target, int p, int y0,
                           int x0, bool hflip, bool vflip) {
  const int h = sample.gt_disparity.h, w = sample.gt_disparity.w;
  if (p > h || p > w || y0 < 0 || x0 < 0 || y0 + p > h || x0 + p > w) {
    throw ShapeError("patch " + std::to_string(p) + " at (" + std::to_string(y0) + "," +
                     std::to_string(x0) + ") exceeds image " + std::to_string(h) + "x" +
                     std::to_string(w));
  }
  PatchExample ex;
  ex.y0 = y0;
  ex.x0 = x0;
  ex.hflip = hflip;
  ex.vflip = vflip;
  if (target == PatchTarget::Focus) {
    copy_compact_stack_patch(sample.left_slices, y0, x0, p, hflip, vflip, ex.left);
    ex.target_disparity = copy_plane_patch(sample.gt_disparity, y0, x0, p, hflip, vflip);
    ex.target_color = copy_plane_patch(to_float(sample.gt_color), y0, x0, p, hflip, vflip);
  } else if (hflip) {
    copy_compact_stack_patch(sample.right_slices, y0, x0, p, true, vflip, ex.left);
    copy_compact_stack_patch(sample.left_slices, y0, x0, p, true, vflip, ex.right);
    ex.target_disparity = copy_plane_patch(sample.gt_disparity_right, y0, x0, p, true, vflip);
  } else {
    copy_compact_stack_patch(sample.left_slices, y0, x0, p, false, vflip, ex.left);
    copy_compact_stack_patch(sample.right_slices, y0, x0, p, false, vflip, ex.right);
    ex.target_disparity = copy_plane_patch(sample.gt_disparity, y0, x0, p, false, vflip);
  }
  return ex;
}

void write_manifest(const Manifest& m) {
  nlohmann::json j;
  j["train"] = m.train_ids;
  j["test"] = m.test_ids;
  j["config"] = m.config;
  j["config_hash"] = m.config_hash;
  std::ofstream os(fs::path(m.root) / "manifest.json");
  os << j.dump(2) << "\n";
  if (!os) throw IoError("failed writing manifest in " + m.root);
}

Manifest read_manifest(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("cannot open manifest " + manifest_path);
  nlohmann::json j = nlohmann::json::parse(is);
  Manifest m;
  m.root = fs::path(manifest_path).parent_path().string();
  m.train_ids = j.at("train").get<std::vector<std::string>>();
  m.test_ids = j.at("test").get<std::vector<std::string>>();
  m.config = j.at("config");
  m.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& id : m.train_ids) {
    if (!fs::exists(fs::path(m.sample_dir(id)) / "meta.json")) {
      throw IoError("manifest references missing sample " + id);
    }
  }
  for (const auto& id : m.test_ids) {
    if (!fs::exists(fs::path(m.sample_dir(id)) / "meta.json")) {
      throw IoError("manifest references missing sample " + id);
    }
  }
  return m;
}

Manifest generate_dataset(const DatasetConfig& config, const std::string& out_dir) {
  Manifest m;
  m.root = out_dir;
  m.config = config.to_json();
  m.config_hash = config_hash_of(m.config);
  fs::create_directories(fs::path(out_dir) / "samples");

  const StereoRig rig = rig_for(config.scene, config.lens);
  auto make = [&](const std::string& id, uint64_t sample_seed) {
    SceneSpec spec = config.scene;
    spec.seed = sample_seed;
    ScenePair pair = gen_scene(spec);
    RandomStream rng(mix_seed(config.seed ^ hash_name(id)), "build");
    SamplePair sample = build_sample(pair, rig, rng, config.build);
    sample.meta.seed = sample_seed;
    save_sample(sample, m.sample_dir(id));
  };

  // disjoint seed ranges for the two splits
  for (int i = 0; i < config.train_count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "train_%03d", i);
    m.train_ids.push_back(buf);
    make(buf, mix_seed(config.seed) + static_cast<uint64_t>(i));
  }
  for (int i = 0; i < config.test_count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "test_%03d", i);
    m.test_ids.push_back(buf);
    make(buf, mix_seed(config.seed) + 1000000ull + static_cast<uint64_t>(i));
  }
  write_manifest(m);
  return m;
}

}  // namespace bdff::data
