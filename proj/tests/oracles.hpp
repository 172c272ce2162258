#pragma once

// Independent reference implementations used as test oracles. These stay
// deliberately naive and separate from the library code paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "bdff/rng.hpp"
#include "bdff/tensor.hpp"

namespace oracle {

// Quadruple-loop direct convolution, zero padding.
template <class T>
bdff::TensorT<T> conv2d_direct(const bdff::TensorT<T>& in, const bdff::TensorT<T>& w,
                               const bdff::TensorT<T>& bias, int stride, int pad) {
  const int n = in.shape[0], c = in.shape[1], h = in.shape[2], wd = in.shape[3];
  const int oc = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (wd + 2 * pad - kw) / stride + 1;
  bdff::TensorT<T> out({n, oc, oh, ow});
  for (int in_n = 0; in_n < n; ++in_n)
    for (int o = 0; o < oc; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = bias.values[o];
          for (int ic = 0; ic < c; ++ic)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += in.at4(in_n, ic, iy, ix) *
                       w.values[((static_cast<int64_t>(o) * c + ic) * kh + ky) * kw + kx];
              }
          out.at4(in_n, o, oy, ox) = acc;
        }
  return out;
}

// Central finite difference of a scalar function w.r.t. every element of x.
template <class T>
std::vector<double> fd_gradient(bdff::TensorT<T>& x, const std::function<double()>& f,
                                double h = 1e-5) {
  std::vector<double> g(x.values.size());
  for (size_t i = 0; i < x.values.size(); ++i) {
    const T saved = x.values[i];
    x.values[i] = saved + static_cast<T>(h);
    const double up = f();
    x.values[i] = saved - static_cast<T>(h);
    const double down = f();
    x.values[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

template <class T>
bdff::TensorT<T> random_tensor(std::vector<int> shape, bdff::RandomStream& rng, double lo = -1.0,
                               double hi = 1.0) {
  bdff::TensorT<T> t(std::move(shape));
  for (auto& v : t.values) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Nudges every parameter off exact zeros/kinks so finite differences are
// well conditioned (fresh beta/bias values put activations exactly at the
// PReLU kink on degenerate 1x1 statistics).
template <class Runtime>
void jitter_params(Runtime& rt, uint64_t seed, double lo = 0.03, double hi = 0.1) {
  bdff::RandomStream rng(seed, "jitter");
  for (auto* p : rt.param_ptrs()) {
    for (auto& v : p->values) {
      v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo, hi);
    }
  }
}

template <class T>
double dot(const bdff::TensorT<T>& a, const bdff::TensorT<T>& b) {
  double s = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    s += static_cast<double>(a.values[i]) * static_cast<double>(b.values[i]);
  }
  return s;
}

}  // namespace oracle
