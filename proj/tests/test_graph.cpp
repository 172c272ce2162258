#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "bdff/checkpoint.hpp"
#include "bdff/grad_check.hpp"
#include "bdff/graph.hpp"
#include "bdff/rng.hpp"
#include "oracles.hpp"

using namespace bdff;
using namespace bdff::nn;

namespace {

NetworkGraph single_conv_graph() {
  GraphBuilder b("single_conv");
  auto in = b.add_input("x", 2);
  auto out = b.conv("solo", in, 2, 3, 3, 1, 1);
  b.mark_output(out);
  b.mark_tap(out);
  return std::move(b).build();
}

NetworkGraph conv_prelu_stack() {
  GraphBuilder b("stack3");
  auto in = b.add_input("x", 2);
  auto t = b.conv("c1", in, 2, 4, 3, 1, 1);
  t = b.prelu("a1", t, 4);
  t = b.conv("c2", t, 4, 4, 3, 1, 1);
  t = b.prelu("a2", t, 4);
  t = b.conv("c3", t, 4, 1, 3, 1, 1);
  b.mark_output(t);
  b.mark_tap(t);
  return std::move(b).build();
}

NetworkGraph mixed_graph() {
  // conv/bn/prelu, pooling, deconv, residual, concat, add all in one graph
  GraphBuilder b("mixed");
  auto in = b.add_input("x", 2);
  auto t = b.conv_bn_prelu("s1", in, 2, 4, 3);
  auto skip = b.residual_module("r1", t, 4, 4);
  auto p = b.maxpool("p1", t, 4);
  auto d = b.conv_bn_prelu("s2", p, 4, 6, 3);
  auto u = b.deconv_bn_prelu("u1", d, 6, 4, 4, 2);
  auto m = b.add("m1", u, skip, 4);
  auto cat = b.concat("cat", {m, t}, {4, 4});
  auto out = b.conv("head", cat, 8, 1, 1, 1, 0);
  b.mark_output(out);
  b.mark_tap(out);
  return std::move(b).build();
}

}  // namespace

TEST_CASE("graph validation catches use-before-def and duplicate names") {
  NetworkGraph g;
  g.name = "bad";
  g.inputs = {{"x", 1}};
  LayerSpec l;
  l.kind = LayerKind::Conv2D;
  l.name = "c";
  l.inputs = {"y"};
  l.output = "z";
  l.in_channels = 1;
  l.out_channels = 1;
  l.kernel = 3;
  g.layers = {l};
  g.outputs = {"z"};
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("shape inference resolves the mixed graph and rejects odd extents") {
  auto g = mixed_graph();
  auto shapes = infer_shapes(g, 2, 16, 16);
  CHECK(shapes.at(g.outputs[0]) == Shape4{2, 1, 16, 16});
  CHECK_THROWS_AS(infer_shapes(g, 1, 15, 15), ShapeError);
}

TEST_CASE("forward matches manual layer calls for a single conv") {
  auto g = single_conv_graph();
  GraphRuntime<double> rt(g);
  rt.init_params(5);
  RandomStream rng(8);
  Tensor64 x = oracle::random_tensor<double>({1, 2, 6, 6}, rng);
  const Tensor64& out = rt.forward({{"x", x}}, Mode::Train);
  Tensor64 ref = conv2d_forward(x, rt.param("solo.weight"), rt.param("solo.bias"), 1, 1);
  CHECK(out.values == ref.values);
}

TEST_CASE("infer-mode forward is bitwise deterministic") {
  auto g = mixed_graph();
  GraphRuntime<float> rt(g);
  rt.init_params(17);
  RandomStream rng(9);
  Tensor x = oracle::random_tensor<float>({1, 2, 8, 8}, rng);
  // one training pass to populate running statistics
  rt.forward({{"x", x}}, Mode::Train);
  Tensor a = rt.forward({{"x", x}}, Mode::Infer);
  Tensor b = rt.forward({{"x", x}}, Mode::Infer);
  CHECK(a.values == b.values);
}

TEST_CASE("grad_check: single conv layer passes under 1e-4") {
  GraphRuntime<double> rt(single_conv_graph());
  rt.init_params(3);
  RandomStream rng(4);
  Tensor64 x = oracle::random_tensor<double>({2, 2, 5, 5}, rng);
  auto report = grad_check(rt, {{"x", x}}, 1e-4);
  CHECK(report.pass());
  CHECK(report.max_rel_err() < 1e-4);
}

TEST_CASE("grad_check: 3-layer conv+PReLU stack passes under 1e-3") {
  GraphRuntime<double> rt(conv_prelu_stack());
  rt.init_params(11);
  RandomStream rng(12);
  Tensor64 x = oracle::random_tensor<double>({2, 2, 6, 6}, rng);
  auto report = grad_check(rt, {{"x", x}}, 1e-3);
  CHECK(report.pass());
}

TEST_CASE("grad_check: mixed graph with norm/pool/deconv/residual passes under 1e-3") {
  GraphRuntime<double> rt(mixed_graph());
  rt.init_params(23);
  RandomStream rng(24);
  Tensor64 x = oracle::random_tensor<double>({2, 2, 8, 8}, rng);
  auto report = grad_check(rt, {{"x", x}}, 1e-3);
  INFO(report.table());
  CHECK(report.pass());
}

TEST_CASE("grad_check report is identical across repeated runs") {
  GraphRuntime<double> rt(conv_prelu_stack());
  rt.init_params(31);
  RandomStream rng(32);
  Tensor64 x = oracle::random_tensor<double>({1, 2, 5, 5}, rng);
  auto r1 = grad_check(rt, {{"x", x}}, 1e-3);
  auto r2 = grad_check(rt, {{"x", x}}, 1e-3);
  REQUIRE(r1.blocks.size() == r2.blocks.size());
  for (size_t i = 0; i < r1.blocks.size(); ++i) {
    CHECK(r1.blocks[i].max_rel_err == r2.blocks[i].max_rel_err);
  }
}

TEST_CASE("shared parameters accumulate gradients from both applications") {
  GraphBuilder b("shared");
  auto in = b.add_input("x", 1);
  auto t1 = b.conv("c", in, 1, 1, 3, 1, 1);
  auto t2 = b.conv("c2", t1, 1, 1, 3, 1, 1, "c");  // same weights again
  b.mark_output(t2);
  b.mark_tap(t2);
  auto g = std::move(b).build();

  GraphRuntime<double> rt(g);
  rt.init_params(7);
  CHECK(rt.param_names().size() == 2);  // c.weight, c.bias only

  RandomStream rng(77);
  Tensor64 x = oracle::random_tensor<double>({1, 1, 5, 5}, rng);
  auto report = grad_check(rt, {{"x", x}}, 1e-3);
  CHECK(report.pass());
}

TEST_CASE("checkpoint round trip preserves params, running stats and adam moments") {
  const std::string path = std::filesystem::temp_directory_path() / "bdff_ckpt_test.ckpt";
  auto g = mixed_graph();
  GraphRuntime<float> rt(g);
  rt.init_params(41);
  RandomStream rng(42);
  Tensor x = oracle::random_tensor<float>({2, 2, 8, 8}, rng);
  rt.forward({{"x", x}}, Mode::Train);  // populate running stats

  AdamState<float> adam;
  rt.zero_grad();
  rt.forward({{"x", x}}, Mode::Train);
  rt.backward({{g.outputs[0], Tensor::full({2, 1, 8, 8}, 0.5f)}});
  auto params = rt.param_ptrs();
  adam_step(params, adam, rt.param_names());
  save_runtime(rt, path, &adam);

  GraphRuntime<float> rt2(g);
  rt2.init_params(999);  // different init, then overwritten by the load
  AdamState<float> adam2;
  auto report = load_runtime(rt2, path, "", &adam2);
  CHECK(report.adam_loaded);
  for (const auto& name : rt.param_names()) {
    CHECK(rt2.param(name).values == rt.param(name).values);
  }
  for (const auto& [prefix, st] : rt.bn_states()) {
    CHECK(rt2.bn_states().at(prefix).running_mean.values == st.running_mean.values);
    CHECK(rt2.bn_states().at(prefix).running_var.values == st.running_var.values);
    CHECK(rt2.bn_states().at(prefix).num_updates == st.num_updates);
  }
  CHECK(adam2.step == adam.step);

  Tensor out1 = rt.forward({{"x", x}}, Mode::Infer);
  Tensor out2 = rt2.forward({{"x", x}}, Mode::Infer);
  CHECK(out1.values == out2.values);
  std::remove(path.c_str());
}

TEST_CASE("loading a mismatched checkpoint lists the missing blocks") {
  const std::string path = std::filesystem::temp_directory_path() / "bdff_ckpt_bad.ckpt";
  GraphRuntime<float> small(single_conv_graph());
  small.init_params(1);
  save_runtime(small, path);

  GraphRuntime<float> big(conv_prelu_stack());
  big.init_params(2);
  try {
    load_runtime(big, path);
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("missing parameter blocks") != std::string::npos);
    CHECK(msg.find("c2.weight") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("graph json dump reports layers and parameter totals") {
  auto g = mixed_graph();
  const std::string js = g.to_json(16, 16);
  CHECK(js.find("\"total_params\"") != std::string::npos);
  CHECK(js.find("Deconv2D") != std::string::npos);
  CHECK(g.total_param_count() > 0);
}
