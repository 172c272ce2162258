#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bdff/layers.hpp"
#include "bdff/rng.hpp"
#include "oracles.hpp"

using namespace bdff;
using namespace bdff::nn;

namespace {

Tensor64 identity_kernel_3x3() {
  Tensor64 w({1, 1, 3, 3});
  w.values[4] = 1.0;
  return w;
}

}  // namespace

TEST_CASE("conv2d identity kernel reproduces the input") {
  Tensor64 in = Tensor64::full({1, 1, 3, 3}, 1.0);
  Tensor64 b({1});
  Tensor64 out = conv2d_forward(in, identity_kernel_3x3(), b, 1, 1);
  REQUIRE(out.shape == in.shape);
  for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.values[i] == doctest::Approx(1.0));

  // and on arbitrary content
  RandomStream rng(3);
  Tensor64 in2 = oracle::random_tensor<double>({2, 1, 5, 4}, rng);
  Tensor64 out2 = conv2d_forward(in2, identity_kernel_3x3(), b, 1, 1);
  for (int64_t i = 0; i < out2.numel(); ++i) {
    CHECK(out2.values[i] == doctest::Approx(in2.values[i]));
  }
}

TEST_CASE("conv2d 5x5 input, 3x3 kernel, pad 1 stride 2 matches direct convolution") {
  RandomStream rng(11);
  Tensor64 in = oracle::random_tensor<double>({1, 1, 5, 5}, rng);
  Tensor64 w = oracle::random_tensor<double>({1, 1, 3, 3}, rng);
  Tensor64 b({1});
  Tensor64 out = conv2d_forward(in, w, b, 2, 1);
  REQUIRE(out.shape == std::vector<int>{1, 1, 3, 3});
  Tensor64 ref = oracle::conv2d_direct(in, w, b, 2, 1);
  for (int64_t i = 0; i < out.numel(); ++i) {
    CHECK(std::fabs(out.values[i] - ref.values[i]) < 1e-6);
  }
}

TEST_CASE("conv2d 3x3 pad 1 stride 1 preserves 64x64 resolution") {
  RandomStream rng(5);
  Tensor in = oracle::random_tensor<float>({1, 2, 64, 64}, rng);
  Tensor w = oracle::random_tensor<float>({3, 2, 3, 3}, rng);
  Tensor b({3});
  Tensor out = conv2d_forward(in, w, b, 1, 1);
  CHECK(out.shape == std::vector<int>{1, 3, 64, 64});
}

TEST_CASE("conv2d matches the direct-convolution oracle over strides and paddings") {
  RandomStream rng(17);
  int cases = 0;
  for (int stride : {1, 2}) {
    for (int pad : {0, 1, 2}) {
      for (int k : {1, 3, 5}) {
        for (int rep = 0; rep < 3; ++rep) {
          const int h = static_cast<int>(rng.uniform_int(k, 9));
          const int w = static_cast<int>(rng.uniform_int(k, 9));
          if ((h + 2 * pad - k) < 0 || (w + 2 * pad - k) < 0) continue;
          const int n = static_cast<int>(rng.uniform_int(1, 2));
          const int ic = static_cast<int>(rng.uniform_int(1, 3));
          const int oc = static_cast<int>(rng.uniform_int(1, 3));
          Tensor64 in = oracle::random_tensor<double>({n, ic, h, w}, rng);
          Tensor64 wt = oracle::random_tensor<double>({oc, ic, k, k}, rng);
          Tensor64 b = oracle::random_tensor<double>({oc}, rng);
          if ((h + 2 * pad - k) / stride + 1 <= 0) continue;
          Tensor64 got = conv2d_forward(in, wt, b, stride, pad);
          Tensor64 ref = oracle::conv2d_direct(in, wt, b, stride, pad);
          REQUIRE(got.shape == ref.shape);
          for (int64_t i = 0; i < got.numel(); ++i) {
            REQUIRE(std::fabs(got.values[i] - ref.values[i]) < 1e-6);
          }
          ++cases;
        }
      }
    }
  }
  CHECK(cases >= 50);
}

TEST_CASE("conv2d channel mismatch raises a shape error naming both shapes") {
  Tensor in({1, 3, 4, 4});
  Tensor w({2, 4, 3, 3});
  Tensor b({2});
  try {
    conv2d_forward(in, w, b, 1, 1);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[1x3x4x4]") != std::string::npos);
    CHECK(msg.find("[2x4x3x3]") != std::string::npos);
  }
}

TEST_CASE("conv2d backward: identity kernel routes ones straight through") {
  Tensor64 in = Tensor64::full({1, 1, 4, 4}, 2.0);
  Tensor64 w = identity_kernel_3x3();
  Tensor64 gout = Tensor64::full({1, 1, 4, 4}, 1.0);
  auto g = conv2d_backward(gout, in, w, 1, 1);
  for (int64_t i = 0; i < g.input_grad.numel(); ++i) {
    CHECK(g.input_grad.values[i] == doctest::Approx(1.0));
  }
}

TEST_CASE("conv2d backward: zero output grad gives zero gradients") {
  RandomStream rng(23);
  Tensor64 in = oracle::random_tensor<double>({1, 2, 5, 5}, rng);
  Tensor64 w = oracle::random_tensor<double>({3, 2, 3, 3}, rng);
  Tensor64 gout({1, 3, 5, 5});
  auto g = conv2d_backward(gout, in, w, 1, 1);
  for (double v : g.input_grad.values) CHECK(v == 0.0);
  for (double v : g.weight_grad.values) CHECK(v == 0.0);
  for (double v : g.bias_grad.values) CHECK(v == 0.0);
}

TEST_CASE("conv2d backward matches finite differences") {
  RandomStream rng(29);
  Tensor64 in = oracle::random_tensor<double>({1, 2, 6, 6}, rng);
  Tensor64 w = oracle::random_tensor<double>({3, 2, 3, 3}, rng);
  Tensor64 b = oracle::random_tensor<double>({3}, rng);
  const int stride = 1, pad = 1;
  Tensor64 proj = oracle::random_tensor<double>({1, 3, 6, 6}, rng);

  auto objective = [&]() {
    return oracle::dot(conv2d_forward(in, w, b, stride, pad), proj);
  };

  auto g = conv2d_backward(proj, in, w, stride, pad);
  auto check_block = [&](Tensor64& block, const Tensor64& analytic) {
    auto fd = oracle::fd_gradient(block, objective);
    for (size_t i = 0; i < fd.size(); ++i) {
      CHECK(oracle::rel_err(analytic.values[i], fd[i]) < 1e-4);
    }
  };
  check_block(in, g.input_grad);
  check_block(w, g.weight_grad);
  check_block(b, g.bias_grad);
}

TEST_CASE("conv2d backward without a cached input is a usage error") {
  Tensor64 empty;
  Tensor64 w({1, 1, 3, 3});
  Tensor64 gout({1, 1, 4, 4});
  CHECK_THROWS_AS(conv2d_backward(gout, empty, w, 1, 1), UsageError);
}

TEST_CASE("deconv2d stride 1 with centered identity kernel is the identity") {
  RandomStream rng(31);
  Tensor64 in = oracle::random_tensor<double>({1, 1, 5, 5}, rng);
  Tensor64 w({1, 1, 3, 3});
  w.values[4] = 1.0;
  Tensor64 b({1});
  Tensor64 out = deconv2d_forward(in, w, b, 1);
  REQUIRE(out.shape == in.shape);
  for (int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out.values[i] == doctest::Approx(in.values[i]));
  }
}

TEST_CASE("deconv2d stride 2 with a 2x2 kernel of ones tiles pixels into blocks") {
  Tensor64 in = Tensor64::from({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor64 w = Tensor64::full({1, 1, 2, 2}, 1.0);
  Tensor64 b({1});
  Tensor64 out = deconv2d_forward(in, w, b, 2);
  REQUIRE(out.shape == std::vector<int>{1, 1, 4, 4});
  const std::vector<double> want = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (int64_t i = 0; i < out.numel(); ++i) CHECK(out.values[i] == doctest::Approx(want[i]));
}

TEST_CASE("deconv2d output extent is stride times input extent") {
  RandomStream rng(37);
  Tensor in = oracle::random_tensor<float>({1, 8, 32, 32}, rng);
  Tensor w = oracle::random_tensor<float>({8, 4, 4, 4}, rng, -0.1, 0.1);
  Tensor b({4});
  Tensor out = deconv2d_forward(in, w, b, 2);
  CHECK(out.shape == std::vector<int>{1, 4, 64, 64});
}

TEST_CASE("deconv2d rejects configurations that cannot hit stride x extent") {
  CHECK_THROWS_AS(deconv2d_crop(3, 2), ConfigError);
  CHECK_THROWS_AS(deconv2d_crop(2, 4), ConfigError);
  CHECK(deconv2d_crop(4, 2) == 1);
  CHECK(deconv2d_crop(16, 8) == 4);
  CHECK(deconv2d_crop(3, 1) == 1);
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
  // <conv(x), y> == <x, deconv(y)>. The conv weight (OutC,InC,k,k) reads
  // directly as the deconv weight (InC,OutC,k,k) for the transposed map.
  RandomStream rng(41);
  for (int stride : {1, 2}) {
    for (int k : {stride == 1 ? 3 : 2, stride == 1 ? 5 : 4}) {
      const int pad = (k - stride) / 2;
      const int h = 6, w = 6;
      const int ic = 2, oc = 3;
      Tensor64 x = oracle::random_tensor<double>({1, ic, h, w}, rng);
      Tensor64 wt = oracle::random_tensor<double>({oc, ic, k, k}, rng);
      Tensor64 zero_oc({oc}), zero_ic({ic});
      Tensor64 y = oracle::random_tensor<double>(
          {1, oc, (h + 2 * pad - k) / stride + 1, (w + 2 * pad - k) / stride + 1}, rng);

      Tensor64 wt_t = Tensor64::from({oc, ic, k, k}, wt.values);  // same layout, swapped roles
      const double lhs = oracle::dot(conv2d_forward(x, wt, zero_oc, stride, pad), y);
      const double rhs = oracle::dot(x, deconv2d_forward(y, wt_t, zero_ic, stride));
      CHECK(std::fabs(lhs - rhs) < 1e-5 * std::max(1.0, std::fabs(lhs)));
    }
  }
}

TEST_CASE("deconv2d backward matches finite differences") {
  RandomStream rng(43);
  Tensor64 in = oracle::random_tensor<double>({1, 3, 3, 3}, rng);
  Tensor64 w = oracle::random_tensor<double>({3, 2, 4, 4}, rng);
  Tensor64 b = oracle::random_tensor<double>({2}, rng);
  Tensor64 proj = oracle::random_tensor<double>({1, 2, 6, 6}, rng);

  auto objective = [&]() { return oracle::dot(deconv2d_forward(in, w, b, 2), proj); };
  auto g = deconv2d_backward(proj, in, w, 2);

  auto check_block = [&](Tensor64& block, const Tensor64& analytic) {
    auto fd = oracle::fd_gradient(block, objective);
    for (size_t i = 0; i < fd.size(); ++i) {
      CHECK(oracle::rel_err(analytic.values[i], fd[i]) < 1e-4);
    }
  };
  check_block(in, g.input_grad);
  check_block(w, g.weight_grad);
  check_block(b, g.bias_grad);
}
