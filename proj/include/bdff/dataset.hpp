#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdff/optics.hpp"
#include "bdff/tensor.hpp"

namespace bdff::data {

// Procedural scene recipe: textured planar/elliptical objects over a
// backdrop. Object depths sit on the scene's 16-layer disparity grid and
// per-object stereo disparities are whole pixels, so the right view is an
// exact re-render (occluded regions fill from the true background layers).
struct SceneSpec {
  uint64_t seed = 0;
  int width = 192, height = 192;  // multiples of 8
  int n_objects = 6;
  double z_near_mm = 1000.0;
  double z_far_mm = 2000.0;
  // disparity of the nearest layer; < 100, and a multiple of n_layers-1 so
  // per-layer pixel shifts are whole pixels
  double max_disparity_px = 30.0;
  int n_layers = 16;

  void validate() const;
};

struct ScenePair {
  optics::Scene left, right;
  // object index + 1 per pixel, 0 for the backdrop; used by the
  // photo-consistency oracle to identify occlusions
  ImageF left_ids, right_ids;
  bool background_only = false;
};

ScenePair gen_scene(const SceneSpec& spec);

// Baseline such that the rig's geometric disparity at z_near equals the
// spec's max_disparity_px (cameras converged on the far plane).
optics::StereoRig rig_for(const SceneSpec& spec, const optics::LensConfig& lens);

// Geometric pixel disparity at depth z for that rig.
double rig_disparity_px(const SceneSpec& spec, double z_mm);

struct BuildParams {
  optics::RenderParams render;
  double noise_peak = 1000.0;  // photons at full scale; <= 0 disables noise
};

struct SampleMeta {
  uint64_t seed = 0;
  double aperture_scale = 1.0;
  double noise_peak = 0.0;
  double baseline_mm = 0.0;
  std::vector<double> focus_depths_mm;
  nlohmann::json to_json() const;
};

struct SamplePair {
  optics::FocalStack left_stack, right_stack;
  ImageF gt_color;               // left all-in-focus color
  ImageF gt_disparity;           // left normalized disparity
  ImageF gt_disparity_right;
  SampleMeta meta;
};

// Renders both stacks with shared focus depths and one shared aperture
// draw, then applies per-slice Poisson noise.
SamplePair build_sample(const ScenePair& pair, const optics::StereoRig& rig, RandomStream& rng,
                        const BuildParams& params);

// ---------------------------------------------------------------------------
// Patch sampling with on-the-fly augmentation.
// ---------------------------------------------------------------------------

enum class PatchTarget { Focus, Stereo };

struct PatchExample {
  Tensor left;              // 1 x 48 x p x p (slices stacked along channels)
  Tensor right;             // stereo only
  Tensor target_disparity;  // 1 x 1 x p x p
  Tensor target_color;      // 1 x 3 x p x p, focus only
  int y0 = 0, x0 = 0;
  bool hflip = false, vflip = false;
};

// Focus: one 64x64 crop of the left stack with aligned ground truth.
// Stereo: crops at identical coordinates from both views; a horizontal flip
// swaps the eyes so disparity geometry stays valid.
PatchExample sample_patch(const SamplePair& sample, PatchTarget target, RandomStream& rng,
                          int patch_size);

// Deterministic core shared with the disk-backed loader.
PatchExample extract_patch(const SamplePair& sample, PatchTarget target, int patch_size, int y0,
                           int x0, bool hflip, bool vflip);

ImageF crop_to_multiple_of_8(const ImageF& image);

// ---------------------------------------------------------------------------
// On-disk dataset: per-sample directory of slice PNGs + PFM ground truth +
// JSON sidecars, indexed by a manifest.
// ---------------------------------------------------------------------------

struct DatasetConfig {
  uint64_t seed = 1;
  int train_count = 60;
  int test_count = 10;
  SceneSpec scene;  // per-sample seeds derive from `seed` and the sample id
  BuildParams build;
  optics::LensConfig lens;

  nlohmann::json to_json() const;
  static DatasetConfig from_json(const nlohmann::json& j);
};

struct Manifest {
  std::string root;  // directory containing manifest.json
  std::vector<std::string> train_ids, test_ids;
  nlohmann::json config;
  std::string config_hash;

  std::string sample_dir(const std::string& id) const;
};

Manifest generate_dataset(const DatasetConfig& config, const std::string& out_dir);
void write_manifest(const Manifest& m);
Manifest read_manifest(const std::string& manifest_path);

void save_sample(const SamplePair& sample, const std::string& dir);
SamplePair load_sample(const std::string& dir);  // slices come back 8-bit quantized

// Memory-lean variant for training: stacks stay 8-bit and convert to float
// per extracted patch.
struct CompactSample {
  std::vector<ImageU8> left_slices, right_slices;
  ImageF gt_disparity, gt_disparity_right;
  ImageU8 gt_color;
  std::vector<double> focus_depths_mm;
};

CompactSample load_compact_sample(const std::string& dir);
PatchExample extract_patch(const CompactSample& sample, PatchTarget target, int patch_size,
                           int y0, int x0, bool hflip, bool vflip);

std::string config_hash_of(const nlohmann::json& config);

}  // namespace bdff::data
