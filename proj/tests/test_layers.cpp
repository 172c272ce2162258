#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "bdff/layers.hpp"
#include "bdff/rng.hpp"
#include "oracles.hpp"

using namespace bdff;
using namespace bdff::nn;

TEST_CASE("prelu definition: a=0.25, x=-2 gives -0.5") {
  Tensor64 in = Tensor64::from({1, 1, 1, 1}, {-2.0});
  Tensor64 a = Tensor64::from({1}, {0.25});
  Tensor64 out = prelu_forward(in, a);
  CHECK(out.values[0] == doctest::Approx(-0.5));
}

TEST_CASE("prelu with zero slope reduces to relu") {
  Tensor64 in = Tensor64::from({1, 1, 1, 2}, {-5.0, 3.0});
  Tensor64 a = Tensor64::from({1}, {0.0});
  Tensor64 out = prelu_forward(in, a);
  CHECK(out.values[0] == 0.0);
  CHECK(out.values[1] == 3.0);
}

TEST_CASE("prelu slope gradient matches finite differences") {
  RandomStream rng(7);
  Tensor64 in = oracle::random_tensor<double>({2, 3, 4, 4}, rng);
  Tensor64 a = Tensor64::from({3}, {0.25, 0.1, 0.7});
  Tensor64 proj = oracle::random_tensor<double>({2, 3, 4, 4}, rng);

  auto objective = [&]() { return oracle::dot(prelu_forward(in, a), proj); };
  auto g = prelu_backward(proj, in, a);

  auto fd_a = oracle::fd_gradient(a, objective);
  for (size_t i = 0; i < fd_a.size(); ++i) {
    CHECK(oracle::rel_err(g.slope_grad.values[i], fd_a[i]) < 1e-4);
  }
  auto fd_in = oracle::fd_gradient(in, objective);
  for (size_t i = 0; i < fd_in.size(); ++i) {
    CHECK(oracle::rel_err(g.input_grad.values[i], fd_in[i]) < 1e-4);
  }
}

namespace {

BatchNormCache<double>* const kNoCache = nullptr;

BatchNormState<double> fresh_state(int channels) {
  BatchNormState<double> st;
  st.running_mean = Tensor64({channels});
  st.running_var = Tensor64::full({channels}, 1.0);
  return st;
}

}  // namespace

TEST_CASE("batchnorm normalizes each channel to mean beta, variance about gamma^2") {
  RandomStream rng(13);
  Tensor64 in = oracle::random_tensor<double>({4, 3, 6, 6}, rng, -3.0, 5.0);
  Tensor64 gamma = Tensor64::full({3}, 1.0);
  Tensor64 beta({3});
  auto st = fresh_state(3);
  Tensor64 out = batchnorm_forward(in, gamma, beta, st, Mode::Train, kNoCache);
  const int64_t m = 4 * 6 * 6;
  for (int c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    for (int n = 0; n < 4; ++n)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) mean += out.at4(n, c, y, x);
    mean /= m;
    for (int n = 0; n < 4; ++n)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) {
          const double d = out.at4(n, c, y, x) - mean;
          var += d * d;
        }
    var /= m;
    CHECK(std::fabs(mean) < 1e-5);
    CHECK(std::fabs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("batchnorm on a constant channel outputs beta everywhere") {
  Tensor64 in = Tensor64::full({2, 1, 4, 4}, 3.7);
  Tensor64 gamma = Tensor64::full({1}, 2.0);
  Tensor64 beta = Tensor64::from({1}, {0.5});
  auto st = fresh_state(1);
  Tensor64 out = batchnorm_forward(in, gamma, beta, st, Mode::Train, kNoCache);
  for (double v : out.values) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("batchnorm backward matches finite differences") {
  RandomStream rng(19);
  Tensor64 in = oracle::random_tensor<double>({2, 2, 3, 3}, rng);
  Tensor64 gamma = Tensor64::from({2}, {1.3, 0.8});
  Tensor64 beta = Tensor64::from({2}, {0.2, -0.4});
  Tensor64 proj = oracle::random_tensor<double>({2, 2, 3, 3}, rng);

  auto st = fresh_state(2);
  auto objective = [&]() {
    auto s = fresh_state(2);
    return oracle::dot(batchnorm_forward(in, gamma, beta, s, Mode::Check, kNoCache), proj);
  };

  BatchNormCache<double> cache;
  batchnorm_forward(in, gamma, beta, st, Mode::Check, &cache);
  auto g = batchnorm_backward(proj, gamma, cache);

  auto fd_in = oracle::fd_gradient(in, objective);
  for (size_t i = 0; i < fd_in.size(); ++i) {
    CHECK(oracle::rel_err(g.input_grad.values[i], fd_in[i]) < 1e-3);
  }
  auto fd_gamma = oracle::fd_gradient(gamma, objective);
  for (size_t i = 0; i < fd_gamma.size(); ++i) {
    CHECK(oracle::rel_err(g.gamma_grad.values[i], fd_gamma[i]) < 1e-3);
  }
  auto fd_beta = oracle::fd_gradient(beta, objective);
  for (size_t i = 0; i < fd_beta.size(); ++i) {
    CHECK(oracle::rel_err(g.beta_grad.values[i], fd_beta[i]) < 1e-3);
  }
}

TEST_CASE("batchnorm infer before any training update is an error") {
  Tensor64 in = Tensor64::full({1, 1, 2, 2}, 1.0);
  Tensor64 gamma = Tensor64::full({1}, 1.0);
  Tensor64 beta({1});
  auto st = fresh_state(1);
  CHECK_THROWS_AS(batchnorm_forward(in, gamma, beta, st, Mode::Infer, kNoCache), UsageError);
  batchnorm_forward(in, gamma, beta, st, Mode::Train, kNoCache);
  CHECK_NOTHROW(batchnorm_forward(in, gamma, beta, st, Mode::Infer, kNoCache));
}

TEST_CASE("batchnorm infer mode is deterministic and uses running statistics") {
  RandomStream rng(23);
  Tensor64 gamma = Tensor64::full({2}, 1.0);
  Tensor64 beta({2});
  auto st = fresh_state(2);
  for (int i = 0; i < 10; ++i) {
    Tensor64 batch = oracle::random_tensor<double>({4, 2, 5, 5}, rng, 1.0, 3.0);
    batchnorm_forward(batch, gamma, beta, st, Mode::Train, kNoCache);
  }
  Tensor64 in = oracle::random_tensor<double>({1, 2, 5, 5}, rng);
  Tensor64 a = batchnorm_forward(in, gamma, beta, st, Mode::Infer, kNoCache);
  Tensor64 b = batchnorm_forward(in, gamma, beta, st, Mode::Infer, kNoCache);
  CHECK(a.values == b.values);
}

TEST_CASE("maxpool picks the block maximum") {
  Tensor64 in = Tensor64::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto r = maxpool2x2_forward(in);
  CHECK(r.output.shape == std::vector<int>{1, 1, 1, 1});
  CHECK(r.output.values[0] == 4.0);
  CHECK(r.argmax[0] == 3);
}

TEST_CASE("maxpool ties resolve to the first element in row-major order") {
  Tensor64 in = Tensor64::full({1, 1, 2, 2}, 5.0);
  auto r = maxpool2x2_forward(in);
  CHECK(r.output.values[0] == 5.0);
  CHECK(r.argmax[0] == 0);
}

TEST_CASE("maxpool rejects odd extents") {
  Tensor64 in({1, 1, 3, 4});
  CHECK_THROWS_AS(maxpool2x2_forward(in), ShapeError);
}

TEST_CASE("maxpool backward conserves gradient mass and routes to argmax") {
  RandomStream rng(29);
  Tensor64 in = oracle::random_tensor<double>({2, 3, 6, 6}, rng);
  auto r = maxpool2x2_forward(in);
  Tensor64 gout = oracle::random_tensor<double>({2, 3, 3, 3}, rng);
  Tensor64 gin = maxpool2x2_backward(gout, r.argmax, in.shape);
  const double sum_in = std::accumulate(gin.values.begin(), gin.values.end(), 0.0);
  const double sum_out = std::accumulate(gout.values.begin(), gout.values.end(), 0.0);
  CHECK(sum_in == doctest::Approx(sum_out));
  // nonzero entries only at argmax positions
  int64_t nonzero = 0;
  for (double v : gin.values) nonzero += (v != 0.0);
  CHECK(nonzero <= static_cast<int64_t>(r.argmax.size()));
}

TEST_CASE("concat and add shape checks") {
  Tensor64 a({1, 2, 4, 4});
  Tensor64 b({1, 3, 4, 4});
  Tensor64 c = concat_channels<double>({&a, &b});
  CHECK(c.shape == std::vector<int>{1, 5, 4, 4});
  Tensor64 bad({1, 3, 5, 4});
  CHECK_THROWS_AS(concat_channels<double>({&a, &bad}), ShapeError);
  CHECK_THROWS_AS(add_forward(a, b), ShapeError);
}
