#include "bdff/grad_suite.hpp"

#include "bdff/networks.hpp"
#include "bdff/rng.hpp"

namespace bdff::nn {

namespace {

Tensor64 random_unit(std::vector<int> shape, RandomStream& rng) {
  Tensor64 t(std::move(shape));
  for (auto& v : t.values) v = rng.uniform(0.0, 1.0);
  return t;
}

// Conditions the check point. Fresh beta/bias values put activations
// exactly on the PReLU kink for degenerate 1x1 statistics, so everything
// gets a small offset. In deep composites the +-h sweeps inevitably push
// some activation across a kink; the induced error scales with |1 - slope|,
// so slopes are centered on 1 there (the slope gradient sum x*go over the
// negative region does not depend on the slope value, so the check loses
// nothing).
void jitter(GraphRuntime<double>& rt, uint64_t seed, bool slopes_near_one) {
  RandomStream rng(seed, "jitter");
  const auto names = rt.param_names();
  for (const auto& name : names) {
    TensorT<double>& p = rt.param(name);
    const bool is_slope = name.size() > 6 && name.compare(name.size() - 6, 6, ".slope") == 0;
    for (auto& v : p.values) {
      if (is_slope && slopes_near_one) {
        v = 1.0 + rng.uniform(-0.02, 0.02);
      } else {
        v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.03, 0.1);
      }
    }
  }
}

}  // namespace

std::vector<std::pair<std::string, GradCheckReport>> run_grad_suite(
    double tolerance, int64_t composite_elems_per_block) {
  std::vector<std::pair<std::string, GradCheckReport>> out;
  RandomStream rng(20240);

  auto check = [&](const std::string& title, NetworkGraph graph,
                   const std::map<std::string, Tensor64>& inputs, int64_t max_elems) {
    const bool composite = max_elems > 0;
    GraphRuntime<double> rt(std::move(graph));
    rt.init_params(hash_name(title));
    jitter(rt, hash_name(title) + 1, composite);
    const double fd_step = composite ? 1e-6 : 1e-5;
    out.emplace_back(title, grad_check(rt, inputs, tolerance, 7, fd_step, max_elems));
  };

  // layer primitives, all elements
  {
    GraphBuilder b("conv");
    auto t = b.conv("conv", b.add_input("x", 2), 2, 3, 3, 1, 1);
    b.mark_output(t);
    b.mark_tap(t);
    check("conv2d", std::move(b).build(), {{"x", random_unit({2, 2, 6, 6}, rng)}}, 0);
  }
  {
    GraphBuilder b("conv_strided");
    auto t = b.conv("conv", b.add_input("x", 2), 2, 3, 4, 2, 1);
    b.mark_output(t);
    b.mark_tap(t);
    check("conv2d stride 2", std::move(b).build(), {{"x", random_unit({1, 2, 8, 8}, rng)}}, 0);
  }
  {
    GraphBuilder b("deconv");
    auto t = b.deconv("deconv", b.add_input("x", 3), 3, 2, 4, 2);
    b.mark_output(t);
    b.mark_tap(t);
    check("deconv2d", std::move(b).build(), {{"x", random_unit({1, 3, 4, 4}, rng)}}, 0);
  }
  {
    GraphBuilder b("prelu");
    auto t = b.conv("c", b.add_input("x", 2), 2, 3, 3, 1, 1);
    t = b.prelu("act", t, 3);
    b.mark_output(t);
    b.mark_tap(t);
    check("prelu", std::move(b).build(), {{"x", random_unit({2, 2, 5, 5}, rng)}}, 0);
  }
  {
    GraphBuilder b("batchnorm");
    auto t = b.conv("c", b.add_input("x", 2), 2, 3, 3, 1, 1);
    t = b.batchnorm("bn", t, 3);
    b.mark_output(t);
    b.mark_tap(t);
    check("batchnorm", std::move(b).build(), {{"x", random_unit({2, 2, 6, 6}, rng)}}, 0);
  }
  {
    GraphBuilder b("maxpool");
    auto t = b.conv("c", b.add_input("x", 1), 1, 2, 3, 1, 1);
    t = b.maxpool("pool", t, 2);
    t = b.conv("head", t, 2, 1, 1, 1, 0);
    b.mark_output(t);
    b.mark_tap(t);
    check("maxpool2x2", std::move(b).build(), {{"x", random_unit({1, 1, 8, 8}, rng)}}, 0);
  }
  {
    GraphBuilder b("residual");
    auto t = b.residual_module("res", b.add_input("x", 3), 3, 4);
    b.mark_output(t);
    b.mark_tap(t);
    check("residual module", std::move(b).build(), {{"x", random_unit({1, 3, 6, 6}, rng)}}, 0);
  }

  // full graph heads at reduced width, 8x8 inputs
  nets::WidthConfig tiny;
  tiny.base = 2;
  tiny.rounds = 1;
  tiny.hourglass_scales = 3;

  const int C = nets::kStackChannels;
  check("edofnet", nets::build_edofnet(tiny),
        {{nets::tensors::kStack, random_unit({1, C, 8, 8}, rng)}},
        composite_elems_per_block);
  check("focusnet", nets::build_focusnet(tiny),
        {{nets::tensors::kStack, random_unit({1, C, 8, 8}, rng)}},
        composite_elems_per_block);
  check("focusnet_v2", nets::build_focusnet_v2(tiny),
        {{nets::tensors::kStack, random_unit({1, C, 8, 8}, rng)}},
        composite_elems_per_block);
  check("stereonet", nets::build_stereonet(tiny, 1),
        {{nets::tensors::kEdofPair, random_unit({1, 6, 8, 8}, rng)}},
        composite_elems_per_block);
  check("bdffnet", nets::build_bdffnet(tiny),
        {{nets::tensors::kStackLeft, random_unit({1, C, 8, 8}, rng)},
         {nets::tensors::kStackRight, random_unit({1, C, 8, 8}, rng)}},
        composite_elems_per_block);
  return out;
}

}  // namespace bdff::nn
