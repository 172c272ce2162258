#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "bdff/dataset.hpp"
#include "bdff/rng.hpp"

using namespace bdff;
using namespace bdff::data;

namespace {

SceneSpec small_spec(uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.width = 64;
  s.height = 64;
  s.n_objects = 4;
  s.max_disparity_px = 15.0;
  return s;
}

std::vector<uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

uint64_t dir_hash(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& f : files) {
    const std::string rel = std::filesystem::relative(f, root).string();
    h ^= hash_name(rel);
    h *= 0x100000001b3ull;
    for (uint8_t b : slurp(f)) {
      h ^= b;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace

TEST_CASE("gen_scene is deterministic for a fixed seed") {
  ScenePair a = gen_scene(small_spec(5));
  ScenePair b = gen_scene(small_spec(5));
  CHECK(a.left.color.v == b.left.color.v);
  CHECK(a.right.color.v == b.right.color.v);
  CHECK(a.left.depth_mm.v == b.left.depth_mm.v);
  ScenePair c = gen_scene(small_spec(6));
  CHECK(a.left.color.v != c.left.color.v);
}

TEST_CASE("gen_scene: disparity spans [0,1] and the near layer shifts by max disparity") {
  SceneSpec spec = small_spec(11);
  ScenePair p = gen_scene(spec);
  float lo = 1e9f, hi = -1e9f;
  for (float d : p.left.disparity.v) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  CHECK(lo == 0.0f);
  CHECK(hi == 1.0f);
  // the nearest-layer object (id 0 in spec order) shifts by the full
  // configured max disparity between the views
  CHECK(rig_disparity_px(spec, spec.z_near_mm) == doctest::Approx(spec.max_disparity_px));
}

TEST_CASE("gen_scene photo-consistency: non-occluded pixels match across views") {
  SceneSpec spec = small_spec(21);
  ScenePair p = gen_scene(spec);
  const int w = spec.width, h = spec.height;
  int checked = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float disp_norm = p.left.disparity.at(0, y, x);
      const int d = static_cast<int>(std::lround(disp_norm * spec.max_disparity_px));
      const int xr = x - d;
      if (xr < 0) continue;
      // visible in both views as the same surface
      if (p.left_ids.at(0, y, x) != p.right_ids.at(0, y, xr)) continue;
      if (p.left.disparity.at(0, y, x) != p.right.disparity.at(0, y, xr)) continue;
      for (int c = 0; c < 3; ++c) {
        REQUIRE(std::fabs(p.left.color.at(c, y, x) - p.right.color.at(c, y, xr)) < 1e-6f);
      }
      ++checked;
    }
  }
  CHECK(checked > h * w / 2);
}

TEST_CASE("gen_scene with zero objects yields a flagged background-only scene") {
  SceneSpec spec = small_spec(3);
  spec.n_objects = 0;
  ScenePair p = gen_scene(spec);
  CHECK(p.background_only);
  for (float d : p.left.disparity.v) CHECK(d == 0.0f);
}

TEST_CASE("scene spec validation") {
  SceneSpec s = small_spec(1);
  s.width = 60;  // not a multiple of 8
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec(1);
  s.max_disparity_px = 14.0;  // not a multiple of n_layers-1
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec(1);
  s.max_disparity_px = 120.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("build_sample: 16 slices per eye, shared focus depths and draw, gt in [0,1]") {
  SceneSpec spec = small_spec(31);
  ScenePair p = gen_scene(spec);
  optics::LensConfig lens;
  optics::StereoRig rig = rig_for(spec, lens);
  RandomStream rng(7);
  BuildParams params;
  params.noise_peak = 500.0;
  SamplePair s = build_sample(p, rig, rng, params);
  CHECK(s.left_stack.slices.size() == 16);
  CHECK(s.right_stack.slices.size() == 16);
  CHECK(s.left_stack.focus_depths_mm == s.right_stack.focus_depths_mm);
  CHECK(s.left_stack.aperture_scale == s.right_stack.aperture_scale);
  for (float d : s.gt_disparity.v) {
    CHECK(d >= 0.0f);
    CHECK(d <= 1.0f);
  }
}

TEST_CASE("build_sample with noise disabled returns the clean render") {
  SceneSpec spec = small_spec(33);
  ScenePair p = gen_scene(spec);
  optics::LensConfig lens;
  optics::StereoRig rig = rig_for(spec, lens);
  BuildParams clean;
  clean.noise_peak = 0.0;
  RandomStream rng1(9), rng2(9);
  SamplePair a = build_sample(p, rig, rng1, clean);
  // second run with the same stream state: renders are pure functions
  SamplePair b = build_sample(p, rig, rng2, clean);
  for (size_t i = 0; i < a.left_stack.slices.size(); ++i) {
    CHECK(a.left_stack.slices[i].v == b.left_stack.slices[i].v);
  }
  BuildParams noisy;
  noisy.noise_peak = 200.0;
  RandomStream rng3(9);
  SamplePair c = build_sample(p, rig, rng3, noisy);
  CHECK(c.left_stack.slices[0].v != a.left_stack.slices[0].v);
}

TEST_CASE("focus patch: 48x64x64 stacked channels with aligned ground truth") {
  SceneSpec spec = small_spec(41);
  ScenePair p = gen_scene(spec);
  optics::StereoRig rig = rig_for(spec, optics::LensConfig{});
  RandomStream rng(11);
  BuildParams params;
  params.noise_peak = 0.0;
  SamplePair s = build_sample(p, rig, rng, params);

  RandomStream prng(13);
  PatchExample ex = sample_patch(s, PatchTarget::Focus, prng, 64);
  CHECK(ex.left.shape == std::vector<int>{1, 48, 64, 64});
  CHECK(ex.target_disparity.shape == std::vector<int>{1, 1, 64, 64});
  CHECK(ex.target_color.shape == std::vector<int>{1, 3, 64, 64});

  // reproducible for an identical stream
  RandomStream prng2(13);
  PatchExample ex2 = sample_patch(s, PatchTarget::Focus, prng2, 64);
  CHECK(ex.y0 == ex2.y0);
  CHECK(ex.x0 == ex2.x0);
  CHECK(ex.left.values == ex2.left.values);

  CHECK_THROWS_AS(sample_patch(s, PatchTarget::Focus, prng, 128), ShapeError);
}

TEST_CASE("flips are involutions and align inputs with labels") {
  SceneSpec spec = small_spec(43);
  ScenePair p = gen_scene(spec);
  optics::StereoRig rig = rig_for(spec, optics::LensConfig{});
  RandomStream rng(17);
  BuildParams params;
  params.noise_peak = 0.0;
  SamplePair s = build_sample(p, rig, rng, params);

  PatchExample plain = extract_patch(s, PatchTarget::Focus, 32, 8, 8, false, false);
  PatchExample flipped = extract_patch(s, PatchTarget::Focus, 32, 8, 8, true, true);
  // flipping the flipped patch restores the original
  for (int c = 0; c < 48; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        REQUIRE(plain.left.at4(0, c, y, x) == flipped.left.at4(0, c, 31 - y, 31 - x));
      }
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      REQUIRE(plain.target_disparity.at4(0, 0, y, x) ==
              flipped.target_disparity.at4(0, 0, 31 - y, 31 - x));
    }
}

TEST_CASE("stereo horizontal flip swaps the eyes and uses right-view ground truth") {
  SceneSpec spec = small_spec(47);
  ScenePair p = gen_scene(spec);
  optics::StereoRig rig = rig_for(spec, optics::LensConfig{});
  RandomStream rng(19);
  BuildParams params;
  params.noise_peak = 0.0;
  SamplePair s = build_sample(p, rig, rng, params);

  PatchExample ex = extract_patch(s, PatchTarget::Stereo, 32, 4, 4, true, false);
  // new left eye = flipped right stack
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      REQUIRE(ex.left.at4(0, 0, y, x) == s.right_stack.slices[0].at(0, 4 + y, 4 + 31 - x));
      REQUIRE(ex.right.at4(0, 0, y, x) == s.left_stack.slices[0].at(0, 4 + y, 4 + 31 - x));
      REQUIRE(ex.target_disparity.at4(0, 0, y, x) ==
              s.gt_disparity_right.at(0, 4 + y, 4 + 31 - x));
    }

  PatchExample un = extract_patch(s, PatchTarget::Stereo, 32, 4, 4, false, false);
  CHECK(un.left.at4(0, 0, 0, 0) == s.left_stack.slices[0].at(0, 4, 4));
}

TEST_CASE("crop_to_multiple_of_8 follows the stated examples") {
  ImageF a(1, 540, 960);
  ImageF c = crop_to_multiple_of_8(a);
  CHECK(c.h == 536);
  CHECK(c.w == 960);
  ImageF b(3, 64, 64);
  CHECK(crop_to_multiple_of_8(b).h == 64);
  ImageF d(1, 9, 9);
  ImageF e = crop_to_multiple_of_8(d);
  CHECK(e.h == 8);
  CHECK(e.w == 8);
  ImageF f(1, 7, 12);
  CHECK_THROWS_AS(crop_to_multiple_of_8(f), ShapeError);
}

TEST_CASE("dataset generation is bitwise reproducible and loads back consistently") {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "bdff_ds_test";
  fs::remove_all(root);

  DatasetConfig cfg;
  cfg.seed = 123;
  cfg.train_count = 2;
  cfg.test_count = 1;
  cfg.scene = small_spec(0);
  cfg.scene.n_objects = 3;
  cfg.build.noise_peak = 300.0;

  Manifest m1 = generate_dataset(cfg, (root / "a").string());
  Manifest m2 = generate_dataset(cfg, (root / "b").string());
  CHECK(m1.train_ids == m2.train_ids);
  CHECK(dir_hash(root / "a") == dir_hash(root / "b"));

  Manifest loaded = read_manifest((root / "a" / "manifest.json").string());
  CHECK(loaded.train_ids == m1.train_ids);
  CHECK(loaded.config_hash == m1.config_hash);

  SamplePair s = load_sample(loaded.sample_dir(loaded.train_ids[0]));
  CHECK(s.left_stack.slices.size() == 16);
  CHECK(s.gt_disparity.h == 64);
  float hi = 0;
  for (float d : s.gt_disparity.v) hi = std::max(hi, d);
  CHECK(hi == 1.0f);

  // splits reference distinct samples
  for (const auto& id : loaded.train_ids) {
    CHECK(std::find(loaded.test_ids.begin(), loaded.test_ids.end(), id) ==
          loaded.test_ids.end());
  }
  fs::remove_all(root);
}
