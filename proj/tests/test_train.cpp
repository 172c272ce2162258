#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "bdff/train.hpp"
#include "bdff/checkpoint.hpp"
#include "bdff/rng.hpp"
#include "oracles.hpp"

using namespace bdff;
using namespace bdff::train;

namespace {

namespace fs = std::filesystem;

struct TempDataset {
  fs::path root;
  data::Manifest manifest;

  TempDataset() {
    root = fs::temp_directory_path() / "bdff_train_test_ds";
    fs::remove_all(root);
    data::DatasetConfig cfg;
    cfg.seed = 99;
    cfg.train_count = 4;
    cfg.test_count = 1;
    cfg.scene.width = 64;
    cfg.scene.height = 64;
    cfg.scene.n_objects = 3;
    cfg.scene.max_disparity_px = 15.0;
    cfg.build.noise_peak = 400.0;
    manifest = data::generate_dataset(cfg, root.string());
  }
  ~TempDataset() { fs::remove_all(root); }
};

TrainConfig tiny_config() {
  TrainConfig c;
  c.width = 4;
  c.epochs = 2;
  c.iters_per_epoch = 4;
  c.batch_size = 2;
  c.patch_focus = 32;
  c.patch_stereo = 64;
  c.seed = 5;
  c.val_patches_per_sample = 1;
  c.val_fraction_percent = 25;
  return c;
}

std::vector<uint8_t> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("mae examples and permutation invariance") {
  ImageF a(1, 4, 4), b(1, 4, 4);
  RandomStream rng(3);
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] = static_cast<float>(rng.uniform());
  CHECK(mae(a, a) == 0.0);
  b = a;
  for (auto& v : b.v) v += 0.1f;
  CHECK(mae(a, b) == doctest::Approx(0.1).epsilon(1e-5));

  // scalar loop oracle
  ImageF c(1, 4, 4);
  for (size_t i = 0; i < c.v.size(); ++i) c.v[i] = static_cast<float>(rng.uniform());
  double want = 0;
  for (size_t i = 0; i < c.v.size(); ++i) want += std::fabs(a.v[i] - c.v[i]);
  want /= c.v.size();
  CHECK(std::fabs(mae(a, c) - want) < 1e-7);

  // simultaneous pixel permutation leaves mae unchanged
  ImageF ap = a, cp = c;
  std::reverse(ap.v.begin(), ap.v.end());
  std::reverse(cp.v.begin(), cp.v.end());
  CHECK(mae(ap, cp) == doctest::Approx(mae(a, c)));

  ImageF wrong(1, 3, 4);
  CHECK_THROWS_AS(mae(a, wrong), ShapeError);
}

TEST_CASE("zero learning rate leaves parameters unchanged over an epoch") {
  TempDataset ds;
  TrainConfig cfg = tiny_config();
  cfg.lr = 0.0;
  cfg.lambda = 0.0;
  cfg.epochs = 1;
  const fs::path out = fs::temp_directory_path() / "bdff_train_lr0";
  fs::remove_all(out);
  train_network(NetKind::Edof, ds.manifest, cfg, {}, out.string());

  nn::Runtime32 trained(nets::build_edofnet(nets::WidthConfig{.base = 4}));
  trained.init_params(1);
  nn::load_runtime(trained, (out / "checkpoints" / "edof.ckpt").string());

  nn::Runtime32 fresh(nets::build_edofnet(nets::WidthConfig{.base = 4}));
  fresh.init_params(mix_seed(cfg.seed ^ hash_name("edof")));
  for (const auto& name : fresh.param_names()) {
    REQUIRE(trained.param(name).values == fresh.param(name).values);
  }
  fs::remove_all(out);
}

TEST_CASE("training runs with identical seeds produce identical loss curves") {
  TempDataset ds;
  TrainConfig cfg = tiny_config();
  const fs::path out1 = fs::temp_directory_path() / "bdff_train_det1";
  const fs::path out2 = fs::temp_directory_path() / "bdff_train_det2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  TrainResult a = train_network(NetKind::Edof, ds.manifest, cfg, {}, out1.string());
  TrainResult b = train_network(NetKind::Edof, ds.manifest, cfg, {}, out2.string());
  CHECK(a.train_loss == b.train_loss);
  CHECK(a.val_loss == b.val_loss);
  CHECK(slurp(out1 / "checkpoints" / "edof.ckpt") == slurp(out2 / "checkpoints" / "edof.ckpt"));
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("one small-lr step decreases the objective on the same batch") {
  // fresh He-initialized EDoFNet, 20 random batches, at least 18 decreases
  using namespace bdff::nn;
  auto graph = nets::build_edofnet(nets::WidthConfig{.base = 4});
  RandomStream rng(11);
  int decreases = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Runtime32 rt(graph);
    rt.init_params(100 + trial);
    Tensor in = oracle::random_tensor<float>({2, 48, 16, 16}, rng, 0.0, 1.0);
    Tensor target = oracle::random_tensor<float>({2, 3, 16, 16}, rng, 0.0, 1.0);
    const double lambda = 0.002;

    auto objective = [&]() {
      rt.forward({{nets::tensors::kStack, in}}, Mode::Check);
      std::vector<const Tensor*> params = rt.param_cptrs();
      return mse_l2_loss<float>(rt.activation(graph.taps[0]), target, params, lambda);
    };

    const double before = objective();
    rt.zero_grad();
    rt.forward({{nets::tensors::kStack, in}}, Mode::Check);
    rt.backward({{graph.taps[0], mse_grad<float>(rt.activation(graph.taps[0]), target)}});
    auto params = rt.param_ptrs();
    add_l2_grad(params, lambda);
    AdamState<float> adam;
    adam.config.lr = 1e-4;
    adam_step(params, adam, rt.param_names());
    const double after = objective();
    decreases += (after < before);
  }
  CHECK(decreases >= 18);
}

TEST_CASE("staged pipeline wiring: all five stages run at toy scale") {
  TempDataset ds;
  TrainConfig cfg = tiny_config();
  cfg.epochs = 1;
  cfg.iters_per_epoch = 2;
  const fs::path out = fs::temp_directory_path() / "bdff_train_stages";
  fs::remove_all(out);
  const std::string dir = out.string();

  TrainResult edof = train_network(NetKind::Edof, ds.manifest, cfg, {}, dir);
  TrainResult focus = train_network(NetKind::Focus, ds.manifest, cfg, {}, dir);
  std::map<std::string, std::string> ckpts = {{"edof", edof.checkpoint},
                                              {"focus", focus.checkpoint}};
  TrainResult focus2 = train_network(NetKind::Focus2, ds.manifest, cfg, ckpts, dir);
  ckpts["focus2"] = focus2.checkpoint;
  TrainResult stereo = train_network(NetKind::Stereo, ds.manifest, cfg, ckpts, dir);
  ckpts["stereo"] = stereo.checkpoint;
  TrainConfig head_cfg = cfg;
  head_cfg.freeze_pretrained = true;
  TrainResult bdff = train_network(NetKind::Bdff, ds.manifest, head_cfg, ckpts, dir);
  ckpts["bdff"] = bdff.checkpoint;

  EvalReport report = compare_models(ds.manifest, ckpts, cfg);
  REQUIRE(report.rows.size() == 4);
  for (const auto& row : report.rows) {
    CHECK(row.mae >= 0.0);
    CHECK(row.mae <= 1.0);
    CHECK(row.seconds > 0.0);
  }
  const std::string csv = report.to_csv();
  CHECK(csv.find("not reproduced") != std::string::npos);
  CHECK(csv.find("0.045/0.031/0.024/0.021") != std::string::npos);

  // identical checkpoints imply identical MAE
  data::SamplePair sample = data::load_sample(ds.manifest.sample_dir(ds.manifest.test_ids[0]));
  ModelBundle m1(NetKind::Focus, nets::WidthConfig{.base = 4}, ckpts);
  ModelBundle m2(NetKind::Focus, nets::WidthConfig{.base = 4}, ckpts);
  CHECK(mae(m1.infer(sample), sample.gt_disparity) ==
        mae(m2.infer(sample), sample.gt_disparity));

  // benchmark: repeated medians agree within the sanity bound
  const double t1 = m1.benchmark_seconds(64, 64);
  const double t2 = m1.benchmark_seconds(64, 64);
  CHECK(std::fabs(t1 - t2) / std::max(t1, t2) < 0.5);
  fs::remove_all(out);
}
