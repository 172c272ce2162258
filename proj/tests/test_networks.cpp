#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bdff/checkpoint.hpp"
#include "bdff/grad_check.hpp"
#include "bdff/networks.hpp"
#include "bdff/rng.hpp"
#include "oracles.hpp"

#include <cstdio>
#include <filesystem>

using namespace bdff;
using namespace bdff::nn;
using namespace bdff::nets;

namespace {

int count_kind(const NetworkGraph& g, LayerKind kind) {
  int n = 0;
  for (const auto& l : g.layers) n += (l.kind == kind);
  return n;
}

WidthConfig tiny() {
  WidthConfig w;
  w.base = 2;
  w.rounds = 1;
  w.hourglass_scales = 2;
  return w;
}

}  // namespace

TEST_CASE("edofnet: 20 convolutions, receptive field 41, resolution preserving") {
  auto g = build_edofnet(WidthConfig{});
  CHECK(count_kind(g, LayerKind::Conv2D) == 20);
  CHECK(receptive_field(g) == 41);
  CHECK(receptive_field(g) > 31);  // covers the largest blur kernel
  auto shapes = infer_shapes(g, 1, 64, 64);
  CHECK(shapes.at(g.outputs[0]) == Shape4{1, 3, 64, 64});
}

TEST_CASE("receptive field recurrence examples") {
  {
    GraphBuilder b("one_conv");
    auto t = b.conv("c", b.add_input("x", 1), 1, 1, 3, 1, 1);
    b.mark_output(t);
    b.mark_tap(t);
    CHECK(receptive_field(std::move(b).build()) == 3);
  }
  {
    GraphBuilder b("conv_pool_conv");
    auto t = b.conv("c1", b.add_input("x", 1), 1, 1, 3, 1, 1);
    t = b.maxpool("p", t, 1);
    t = b.conv("c2", t, 1, 1, 3, 1, 1);
    b.mark_output(t);
    b.mark_tap(t);
    CHECK(receptive_field(std::move(b).build()) == 8);
  }
}

TEST_CASE("focusnet: four branches concatenated, 1-channel output, /8 divisibility") {
  auto g = build_focusnet(WidthConfig{});
  // the four branch outputs meet in a single concat layer
  int concat_inputs = 0;
  for (const auto& l : g.layers) {
    if (l.kind == LayerKind::Concat && l.name == "cat") {
      concat_inputs = static_cast<int>(l.inputs.size());
    }
  }
  CHECK(concat_inputs == 4);
  auto shapes = infer_shapes(g, 1, 64, 64);
  CHECK(shapes.at(g.outputs[0]) == Shape4{1, 1, 64, 64});
  CHECK_THROWS_AS(infer_shapes(g, 1, 65, 65), ShapeError);
  CHECK_THROWS_AS(infer_shapes(g, 1, 60, 60), ShapeError);  // not a multiple of 8
}

TEST_CASE("all five constructors pass shape inference at 64, 128 and 256") {
  WidthConfig w;
  w.base = 4;
  std::vector<NetworkGraph> graphs;
  graphs.push_back(build_edofnet(w));
  graphs.push_back(build_focusnet(w));
  graphs.push_back(build_focusnet_v2(w));
  graphs.push_back(build_stereonet(w));
  graphs.push_back(build_bdffnet(w));
  for (const auto& g : graphs) {
    for (int s : {64, 128, 256}) {
      auto shapes = infer_shapes(g, 1, s, s);
      CHECK(shapes.at(g.outputs[0]).h == s);
      CHECK(shapes.at(g.outputs[0]).w == s);
    }
  }
  // sampling graphs reject a 65x65 input with a diagnostic
  for (size_t i = 1; i < graphs.size(); ++i) {
    CHECK_THROWS_AS(infer_shapes(graphs[i], 1, 65, 65), ShapeError);
  }
}

TEST_CASE("focusnet_v2: 10 fusion convolutions, loadable pretrained sub-nets") {
  auto g = build_focusnet_v2(WidthConfig{});
  int fusion_convs = 0;
  for (const auto& l : g.layers) {
    if (l.kind == LayerKind::Conv2D && l.name.rfind("fuse.", 0) == 0) ++fusion_convs;
  }
  CHECK(fusion_convs == 10);
  auto shapes = infer_shapes(g, 1, 64, 64);
  CHECK(shapes.at(g.outputs[0]) == Shape4{1, 1, 64, 64});
}

TEST_CASE("frozen EDoFNet inside FocusNet-v2 reproduces the standalone output bitwise") {
  WidthConfig w;
  w.base = 4;
  const std::string path = std::filesystem::temp_directory_path() / "bdff_edof_sub.ckpt";

  GraphRuntime<float> edof(build_edofnet(w));
  edof.init_params(101);
  save_runtime(edof, path);

  GraphRuntime<float> v2(build_focusnet_v2(w));
  v2.init_params(202);
  load_runtime(v2, path, "edof.");

  RandomStream rng(5);
  Tensor stack = oracle::random_tensor<float>({1, kStackChannels, 16, 16}, rng, 0.0, 1.0);
  const Tensor& ref = edof.forward({{tensors::kStack, stack}}, Mode::Check);
  v2.forward({{tensors::kStack, stack}}, Mode::Check);
  const Tensor& sub = v2.activation(v2.graph().outputs[2]);  // EDoF tap
  REQUIRE(ref.shape == sub.shape);
  CHECK(ref.values == sub.values);
  std::remove(path.c_str());
}

TEST_CASE("stereonet: two supervised taps, full output resolution, small kernels only") {
  auto g = build_stereonet(WidthConfig{});
  CHECK(g.taps.size() == 2);
  auto shapes = infer_shapes(g, 1, 64, 64);
  for (const auto& tap : g.taps) {
    CHECK(shapes.at(tap) == Shape4{1, 1, 64, 64});
  }
  for (const auto& l : g.layers) {
    if (l.kind == LayerKind::Conv2D && l.stride == 1) {
      CHECK((l.kernel == 1 || l.kernel == 3));
    }
  }
  // round weights are not shared
  for (const auto& l : g.layers) CHECK(l.share_params_with.empty());
}

TEST_CASE("stereonet taps scale with rounds") {
  CHECK(build_stereonet(WidthConfig{}, 3).taps.size() == 3);
}

TEST_CASE("bdffnet: fusion head sees 5 channels (1 disparity + 1 depth + 3 EDoF)") {
  auto g = build_bdffnet(WidthConfig{});
  bool found = false;
  for (const auto& l : g.layers) {
    if (l.name == "head.cat") {
      CHECK(l.out_channels == 5);
      CHECK(l.inputs.size() == 3);
      found = true;
    }
  }
  CHECK(found);
  auto shapes = infer_shapes(g, 1, 64, 64);
  CHECK(shapes.at(g.outputs[0]) == Shape4{1, 1, 64, 64});
}

TEST_CASE("bdffnet shares EDoF weights across both eyes") {
  auto g = build_bdffnet(WidthConfig{});
  int shared = 0;
  for (const auto& l : g.layers) {
    if (l.name.rfind("edofR.", 0) == 0 && l.has_params()) {
      REQUIRE(!l.share_params_with.empty());
      CHECK(l.share_params_with.rfind("edof.", 0) == 0);
      ++shared;
    }
  }
  CHECK(shared > 0);
  GraphRuntime<float> rt(g);
  rt.init_params(7);
  for (const auto& name : rt.param_names()) {
    CHECK(name.rfind("edofR.", 0) != 0);  // no duplicate parameter blocks
  }
}

TEST_CASE("bdffnet head gradients pass finite-difference checks at 1e-3") {
  GraphRuntime<double> rt(build_bdffnet(tiny()));
  rt.init_params(99);
  oracle::jitter_params(rt, 4242);
  RandomStream rng(100);
  Tensor64 left = oracle::random_tensor<double>({1, kStackChannels, 8, 8}, rng, 0.0, 1.0);
  Tensor64 right = oracle::random_tensor<double>({1, kStackChannels, 8, 8}, rng, 0.0, 1.0);
  auto report = grad_check(
      rt, {{tensors::kStackLeft, left}, {tensors::kStackRight, right}}, 1e-3, 7, 1e-5, 4);
  int head_blocks = 0;
  for (const auto& b : report.blocks) {
    if (b.name.rfind("head.", 0) == 0) {
      CHECK(b.max_rel_err < 1e-3);
      ++head_blocks;
    }
  }
  CHECK(head_blocks > 0);
}

TEST_CASE("parameter counts are a deterministic function of the width config") {
  WidthConfig w;
  w.base = 8;
  auto a = build_focusnet(w);
  auto b = build_focusnet(w);
  CHECK(a.total_param_count() == b.total_param_count());
  CHECK(a.to_json() == b.to_json());
  GraphRuntime<float> rt(a);
  rt.init_params(1);
  CHECK(rt.param_count() == a.total_param_count());

  WidthConfig wider = w;
  wider.base = 16;
  CHECK(build_focusnet(wider).total_param_count() > a.total_param_count());
}

TEST_CASE("width config rejects zero width") {
  WidthConfig w;
  w.base = 0;
  CHECK_THROWS_AS(build_edofnet(w), ConfigError);
}
