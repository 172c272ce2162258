#include "bdff/layers.hpp"

#include <algorithm>
#include <cmath>

#include "bdff/parallel.hpp"

namespace bdff::nn {

namespace {

void check_conv_args(int stride, int padding) {
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1, got " + std::to_string(stride));
  if (padding < 0) throw ConfigError("conv2d: padding must be >= 0, got " + std::to_string(padding));
}

int conv_out_extent(int in, int pad, int k, int stride) {
  return (in + 2 * pad - k) / stride + 1;
}

// floor division for possibly negative numerators (stride > 0)
inline int floor_div_pos(int a, int s) { return a >= 0 ? a / s : -((-a + s - 1) / s); }

}  // namespace

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& weight,
                          const TensorT<T>& bias, int stride, int padding) {
  check_conv_args(stride, padding);
  if (input.rank() != 4 || weight.rank() != 4) {
    throw ShapeError("conv2d: expected 4-D input and weight, got " + input.dims() + " and " +
                     weight.dims());
  }
  const int n = input.shape[0], c = input.shape[1], h = input.shape[2], w = input.shape[3];
  const int oc = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3];
  if (weight.shape[1] != c) {
    throw ShapeError("conv2d: input channels " + input.dims() + " do not match weight " +
                     weight.dims());
  }
  if (bias.numel() != oc) {
    throw ShapeError("conv2d: bias " + bias.dims() + " does not match out channels " +
                     std::to_string(oc));
  }
  const int oh = conv_out_extent(h, padding, kh, stride);
  const int ow = conv_out_extent(w, padding, kw, stride);
  if (oh <= 0 || ow <= 0) {
    throw ShapeError("conv2d: non-positive output extent for input " + input.dims() +
                     ", kernel " + weight.dims());
  }

  TensorT<T> out({n, oc, oh, ow});
  const int64_t work = static_cast<int64_t>(n) * oc * oh * ow * c * kh * kw;
  parallel_for(static_cast<int64_t>(n) * oc, work, [&](int64_t job) {
    const int in_n = static_cast<int>(job / oc);
    const int o = static_cast<int>(job % oc);
    T* optr = &out.values[out.idx4(in_n, o, 0, 0)];
    std::fill(optr, optr + static_cast<int64_t>(oh) * ow, bias.values[o]);
    for (int ic = 0; ic < c; ++ic) {
      const T* iptr = &input.values[input.idx4(in_n, ic, 0, 0)];
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const T wv = weight.values[((static_cast<int64_t>(o) * c + ic) * kh + ky) * kw + kx];
          if (wv == T(0)) continue;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= h) continue;
            // valid ox range: 0 <= ox*stride - padding + kx < w
            int ox0 = 0;
            int ix = -padding + kx;
            if (ix < 0) ox0 = (-ix + stride - 1) / stride;
            int ox1 = ow;  // exclusive
            // largest ox with ox*stride + ix <= w-1
            const int limit = floor_div_pos(w - 1 - ix, stride);
            if (limit + 1 < ox1) ox1 = limit + 1;
            T* orow = optr + static_cast<int64_t>(oy) * ow;
            const T* irow = iptr + static_cast<int64_t>(iy) * w;
            if (stride == 1) {
              for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[ox + ix];
            } else {
              for (int ox = ox0; ox < ox1; ++ox) orow[ox] += wv * irow[ox * stride + ix];
            }
          }
        }
      }
    }
  });
  return out;
}

template <class T>
ConvGrads<T> conv2d_backward(const TensorT<T>& output_grad, const TensorT<T>& cached_input,
                             const TensorT<T>& weight, int stride, int padding) {
  check_conv_args(stride, padding);
  if (cached_input.numel() == 0) throw UsageError("conv2d_backward: missing forward cache");
  const int n = cached_input.shape[0], c = cached_input.shape[1];
  const int h = cached_input.shape[2], w = cached_input.shape[3];
  const int oc = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3];
  const int oh = conv_out_extent(h, padding, kh, stride);
  const int ow = conv_out_extent(w, padding, kw, stride);
  if (output_grad.shape != std::vector<int>{n, oc, oh, ow}) {
    throw ShapeError("conv2d_backward: output_grad " + output_grad.dims() +
                     " does not match forward output shape " +
                     TensorT<T>::dims_str({n, oc, oh, ow}));
  }

  ConvGrads<T> g;
  g.input_grad = TensorT<T>({n, c, h, w});
  g.weight_grad = TensorT<T>(weight.shape);
  g.bias_grad = TensorT<T>({oc});

  const int64_t work = static_cast<int64_t>(n) * oc * oh * ow * c * kh * kw;
  // d input: scatter output_grad through the kernel. Parallel over (n, ic).
  parallel_for(static_cast<int64_t>(n) * c, work, [&](int64_t job) {
    const int in_n = static_cast<int>(job / c);
    const int ic = static_cast<int>(job % c);
    T* gptr = &g.input_grad.values[g.input_grad.idx4(in_n, ic, 0, 0)];
    for (int o = 0; o < oc; ++o) {
      const T* goptr = &output_grad.values[output_grad.idx4(in_n, o, 0, 0)];
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const T wv = weight.values[((static_cast<int64_t>(o) * c + ic) * kh + ky) * kw + kx];
          if (wv == T(0)) continue;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= h) continue;
            int ox0 = 0;
            const int ix_base = -padding + kx;
            if (ix_base < 0) ox0 = (-ix_base + stride - 1) / stride;
            int ox1 = ow;
            const int limit = floor_div_pos(w - 1 - ix_base, stride);
            if (limit + 1 < ox1) ox1 = limit + 1;
            const T* gorow = goptr + static_cast<int64_t>(oy) * ow;
            T* girow = gptr + static_cast<int64_t>(iy) * w;
            for (int ox = ox0; ox < ox1; ++ox) girow[ox * stride + ix_base] += wv * gorow[ox];
          }
        }
      }
    }
  });

  // d weight and d bias. Parallel over oc, sums run in fixed order.
  parallel_for(oc, work, [&](int64_t o) {
    T bsum = T(0);
    for (int in_n = 0; in_n < n; ++in_n) {
      const T* goptr = &output_grad.values[output_grad.idx4(in_n, static_cast<int>(o), 0, 0)];
      for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) bsum += goptr[i];
    }
    g.bias_grad.values[o] = bsum;
    for (int ic = 0; ic < c; ++ic) {
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          T acc = T(0);
          for (int in_n = 0; in_n < n; ++in_n) {
            const T* goptr = &output_grad.values[output_grad.idx4(in_n, static_cast<int>(o), 0, 0)];
            const T* iptr = &cached_input.values[cached_input.idx4(in_n, ic, 0, 0)];
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride - padding + ky;
              if (iy < 0 || iy >= h) continue;
              int ox0 = 0;
              const int ix_base = -padding + kx;
              if (ix_base < 0) ox0 = (-ix_base + stride - 1) / stride;
              int ox1 = ow;
              const int limit = floor_div_pos(w - 1 - ix_base, stride);
              if (limit + 1 < ox1) ox1 = limit + 1;
              const T* gorow = goptr + static_cast<int64_t>(oy) * ow;
              const T* irow = iptr + static_cast<int64_t>(iy) * w;
              for (int ox = ox0; ox < ox1; ++ox) acc += gorow[ox] * irow[ox * stride + ix_base];
            }
          }
          g.weight_grad.values[((o * c + ic) * kh + ky) * kw + kx] = acc;
        }
      }
    }
  });
  return g;
}

int deconv2d_crop(int kernel, int stride) {
  if (stride < 1) throw ConfigError("deconv2d: stride must be >= 1");
  if (kernel < stride || (kernel - stride) % 2 != 0) {
    throw ConfigError("deconv2d: kernel " + std::to_string(kernel) + " with stride " +
                      std::to_string(stride) +
                      " cannot produce output extent = stride * input extent");
  }
  return (kernel - stride) / 2;
}

template <class T>
TensorT<T> deconv2d_forward(const TensorT<T>& input, const TensorT<T>& weight,
                            const TensorT<T>& bias, int stride) {
  if (input.rank() != 4 || weight.rank() != 4) {
    throw ShapeError("deconv2d: expected 4-D input and weight, got " + input.dims() + " and " +
                     weight.dims());
  }
  const int n = input.shape[0], c = input.shape[1], h = input.shape[2], w = input.shape[3];
  if (weight.shape[0] != c) {
    throw ShapeError("deconv2d: input channels " + input.dims() + " do not match weight " +
                     weight.dims());
  }
  const int oc = weight.shape[1], kh = weight.shape[2], kw = weight.shape[3];
  if (kh != kw) throw ConfigError("deconv2d: only square kernels are supported");
  const int crop = deconv2d_crop(kh, stride);
  if (bias.numel() != oc) {
    throw ShapeError("deconv2d: bias " + bias.dims() + " does not match out channels " +
                     std::to_string(oc));
  }
  const int oh = h * stride, ow = w * stride;

  TensorT<T> out({n, oc, oh, ow});
  const int64_t work = static_cast<int64_t>(n) * oc * oh * ow * c * kh * kw;
  parallel_for(static_cast<int64_t>(n) * oc, work, [&](int64_t job) {
    const int in_n = static_cast<int>(job / oc);
    const int o = static_cast<int>(job % oc);
    T* optr = &out.values[out.idx4(in_n, o, 0, 0)];
    std::fill(optr, optr + static_cast<int64_t>(oh) * ow, bias.values[o]);
    for (int ic = 0; ic < c; ++ic) {
      const T* iptr = &input.values[input.idx4(in_n, ic, 0, 0)];
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const T wv = weight.values[((static_cast<int64_t>(ic) * oc + o) * kh + ky) * kw + kx];
          if (wv == T(0)) continue;
          for (int y = 0; y < h; ++y) {
            const int oy = y * stride + ky - crop;
            if (oy < 0 || oy >= oh) continue;
            const int ox_base = kx - crop;
            int x0 = 0;
            if (ox_base < 0) x0 = (-ox_base + stride - 1) / stride;
            int x1 = w;
            const int limit = floor_div_pos(ow - 1 - ox_base, stride);
            if (limit + 1 < x1) x1 = limit + 1;
            const T* irow = iptr + static_cast<int64_t>(y) * w;
            T* orow = optr + static_cast<int64_t>(oy) * ow;
            for (int x = x0; x < x1; ++x) orow[x * stride + ox_base] += wv * irow[x];
          }
        }
      }
    }
  });
  return out;
}

template <class T>
ConvGrads<T> deconv2d_backward(const TensorT<T>& output_grad, const TensorT<T>& cached_input,
                               const TensorT<T>& weight, int stride) {
  if (cached_input.numel() == 0) throw UsageError("deconv2d_backward: missing forward cache");
  const int n = cached_input.shape[0], c = cached_input.shape[1];
  const int h = cached_input.shape[2], w = cached_input.shape[3];
  const int oc = weight.shape[1], kh = weight.shape[2], kw = weight.shape[3];
  const int crop = deconv2d_crop(kh, stride);
  const int oh = h * stride, ow = w * stride;
  if (output_grad.shape != std::vector<int>{n, oc, oh, ow}) {
    throw ShapeError("deconv2d_backward: output_grad " + output_grad.dims() +
                     " does not match forward output shape " +
                     TensorT<T>::dims_str({n, oc, oh, ow}));
  }

  ConvGrads<T> g;
  g.input_grad = TensorT<T>({n, c, h, w});
  g.weight_grad = TensorT<T>(weight.shape);
  g.bias_grad = TensorT<T>({oc});

  const int64_t work = static_cast<int64_t>(n) * oc * h * w * c * kh * kw;
  // d input: a plain convolution of output_grad with the kernel.
  parallel_for(static_cast<int64_t>(n) * c, work, [&](int64_t job) {
    const int in_n = static_cast<int>(job / c);
    const int ic = static_cast<int>(job % c);
    T* gptr = &g.input_grad.values[g.input_grad.idx4(in_n, ic, 0, 0)];
    for (int o = 0; o < oc; ++o) {
      const T* goptr = &output_grad.values[output_grad.idx4(in_n, o, 0, 0)];
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const T wv = weight.values[((static_cast<int64_t>(ic) * oc + o) * kh + ky) * kw + kx];
          if (wv == T(0)) continue;
          for (int y = 0; y < h; ++y) {
            const int oy = y * stride + ky - crop;
            if (oy < 0 || oy >= oh) continue;
            const int ox_base = kx - crop;
            int x0 = 0;
            if (ox_base < 0) x0 = (-ox_base + stride - 1) / stride;
            int x1 = w;
            const int limit = floor_div_pos(ow - 1 - ox_base, stride);
            if (limit + 1 < x1) x1 = limit + 1;
            const T* gorow = goptr + static_cast<int64_t>(oy) * ow;
            T* girow = gptr + static_cast<int64_t>(y) * w;
            for (int x = x0; x < x1; ++x) girow[x] += wv * gorow[x * stride + ox_base];
          }
        }
      }
    }
  });

  // d weight, d bias.
  parallel_for(oc, work, [&](int64_t o) {
    T bsum = T(0);
    for (int in_n = 0; in_n < n; ++in_n) {
      const T* goptr = &output_grad.values[output_grad.idx4(in_n, static_cast<int>(o), 0, 0)];
      for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) bsum += goptr[i];
    }
    g.bias_grad.values[o] = bsum;
    for (int ic = 0; ic < c; ++ic) {
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          T acc = T(0);
          for (int in_n = 0; in_n < n; ++in_n) {
            const T* goptr = &output_grad.values[output_grad.idx4(in_n, static_cast<int>(o), 0, 0)];
            const T* iptr = &cached_input.values[cached_input.idx4(in_n, ic, 0, 0)];
            for (int y = 0; y < h; ++y) {
              const int oy = y * stride + ky - crop;
              if (oy < 0 || oy >= oh) continue;
              const int ox_base = kx - crop;
              int x0 = 0;
              if (ox_base < 0) x0 = (-ox_base + stride - 1) / stride;
              int x1 = w;
              const int limit = floor_div_pos(ow - 1 - ox_base, stride);
              if (limit + 1 < x1) x1 = limit + 1;
              const T* irow = iptr + static_cast<int64_t>(y) * w;
              const T* gorow = goptr + static_cast<int64_t>(oy) * ow;
              for (int x = x0; x < x1; ++x) acc += irow[x] * gorow[x * stride + ox_base];
            }
          }
          g.weight_grad.values[((static_cast<int64_t>(ic) * oc + o) * kh + ky) * kw + kx] = acc;
        }
      }
    }
  });
  return g;
}

template <class T>
TensorT<T> prelu_forward(const TensorT<T>& input, const TensorT<T>& slope) {
  if (input.rank() != 4 || slope.numel() != input.shape[1]) {
    throw ShapeError("prelu: slope " + slope.dims() + " must have one entry per channel of " +
                     input.dims());
  }
  TensorT<T> out(input.shape);
  const int n = input.shape[0], c = input.shape[1];
  const int64_t plane = static_cast<int64_t>(input.shape[2]) * input.shape[3];
  parallel_for(static_cast<int64_t>(n) * c, input.numel(), [&](int64_t job) {
    const int ic = static_cast<int>(job % c);
    const T a = slope.values[ic];
    const T* ip = &input.values[job * plane];
    T* op = &out.values[job * plane];
    for (int64_t i = 0; i < plane; ++i) op[i] = ip[i] > T(0) ? ip[i] : a * ip[i];
  });
  return out;
}

template <class T>
PreluGrads<T> prelu_backward(const TensorT<T>& output_grad, const TensorT<T>& cached_input,
                             const TensorT<T>& slope) {
  require_same_shape(output_grad, cached_input, "prelu_backward");
  PreluGrads<T> g;
  g.input_grad = TensorT<T>(cached_input.shape);
  g.slope_grad = TensorT<T>(slope.shape);
  const int n = cached_input.shape[0], c = cached_input.shape[1];
  const int64_t plane = static_cast<int64_t>(cached_input.shape[2]) * cached_input.shape[3];
  parallel_for(c, cached_input.numel(), [&](int64_t ic) {
    const T a = slope.values[ic];
    T asum = T(0);
    for (int in_n = 0; in_n < n; ++in_n) {
      const int64_t base = (static_cast<int64_t>(in_n) * c + ic) * plane;
      const T* ip = &cached_input.values[base];
      const T* gp = &output_grad.values[base];
      T* op = &g.input_grad.values[base];
      for (int64_t i = 0; i < plane; ++i) {
        if (ip[i] > T(0)) {
          op[i] = gp[i];
        } else {
          op[i] = a * gp[i];
          asum += gp[i] * ip[i];
        }
      }
    }
    g.slope_grad.values[ic] = asum;
  });
  return g;
}

template <class T>
TensorT<T> batchnorm_forward(const TensorT<T>& input, const TensorT<T>& gamma,
                             const TensorT<T>& beta, BatchNormState<T>& state, Mode mode,
                             BatchNormCache<T>* cache) {
  const int n = input.shape[0], c = input.shape[1];
  if (gamma.numel() != c || beta.numel() != c) {
    throw ShapeError("batchnorm: gamma/beta must have one entry per channel of " + input.dims());
  }
  if (mode == Mode::Infer && state.num_updates == 0) {
    throw UsageError("batchnorm: inference requested but running statistics were never updated");
  }
  const int64_t plane = static_cast<int64_t>(input.shape[2]) * input.shape[3];
  const int64_t m = static_cast<int64_t>(n) * plane;
  TensorT<T> out(input.shape);
  if (cache && mode != Mode::Infer) {
    cache->x_hat = TensorT<T>(input.shape);
    cache->inv_std.assign(c, T(0));
    cache->mean.assign(c, T(0));
  }
  parallel_for(c, input.numel() * 3, [&](int64_t ic) {
    T mean, var;
    if (mode == Mode::Infer) {
      mean = state.running_mean.values[ic];
      var = state.running_var.values[ic];
    } else {
      T sum = T(0);
      for (int in_n = 0; in_n < n; ++in_n) {
        const T* ip = &input.values[(static_cast<int64_t>(in_n) * c + ic) * plane];
        for (int64_t i = 0; i < plane; ++i) sum += ip[i];
      }
      mean = sum / static_cast<T>(m);
      T sq = T(0);
      for (int in_n = 0; in_n < n; ++in_n) {
        const T* ip = &input.values[(static_cast<int64_t>(in_n) * c + ic) * plane];
        for (int64_t i = 0; i < plane; ++i) {
          const T d = ip[i] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<T>(m);
    }
    const T inv_std = T(1) / std::sqrt(var + static_cast<T>(state.eps));
    const T g = gamma.values[ic], b = beta.values[ic];
    for (int in_n = 0; in_n < n; ++in_n) {
      const int64_t base = (static_cast<int64_t>(in_n) * c + ic) * plane;
      const T* ip = &input.values[base];
      T* op = &out.values[base];
      if (cache && mode != Mode::Infer) {
        T* xh = &cache->x_hat.values[base];
        for (int64_t i = 0; i < plane; ++i) {
          xh[i] = (ip[i] - mean) * inv_std;
          op[i] = g * xh[i] + b;
        }
      } else {
        for (int64_t i = 0; i < plane; ++i) op[i] = g * (ip[i] - mean) * inv_std + b;
      }
    }
    if (cache && mode != Mode::Infer) {
      cache->inv_std[ic] = inv_std;
      cache->mean[ic] = mean;
    }
    if (mode == Mode::Train) {
      const T mom = static_cast<T>(state.momentum);
      state.running_mean.values[ic] = mom * state.running_mean.values[ic] + (T(1) - mom) * mean;
      state.running_var.values[ic] = mom * state.running_var.values[ic] + (T(1) - mom) * var;
    }
  });
  if (mode == Mode::Train) ++state.num_updates;
  return out;
}

template <class T>
BatchNormGrads<T> batchnorm_backward(const TensorT<T>& output_grad, const TensorT<T>& gamma,
                                     const BatchNormCache<T>& cache) {
  if (cache.x_hat.numel() == 0) throw UsageError("batchnorm_backward: missing forward cache");
  require_same_shape(output_grad, cache.x_hat, "batchnorm_backward");
  const int n = output_grad.shape[0], c = output_grad.shape[1];
  const int64_t plane = static_cast<int64_t>(output_grad.shape[2]) * output_grad.shape[3];
  const int64_t m = static_cast<int64_t>(n) * plane;

  BatchNormGrads<T> g;
  g.input_grad = TensorT<T>(output_grad.shape);
  g.gamma_grad = TensorT<T>(gamma.shape);
  g.beta_grad = TensorT<T>(gamma.shape);
  parallel_for(c, output_grad.numel() * 3, [&](int64_t ic) {
    T dbeta = T(0), dgamma = T(0);
    for (int in_n = 0; in_n < n; ++in_n) {
      const int64_t base = (static_cast<int64_t>(in_n) * c + ic) * plane;
      const T* go = &output_grad.values[base];
      const T* xh = &cache.x_hat.values[base];
      for (int64_t i = 0; i < plane; ++i) {
        dbeta += go[i];
        dgamma += go[i] * xh[i];
      }
    }
    g.beta_grad.values[ic] = dbeta;
    g.gamma_grad.values[ic] = dgamma;
    const T k1 = dbeta / static_cast<T>(m);
    const T k2 = dgamma / static_cast<T>(m);
    const T scale = gamma.values[ic] * cache.inv_std[ic];
    for (int in_n = 0; in_n < n; ++in_n) {
      const int64_t base = (static_cast<int64_t>(in_n) * c + ic) * plane;
      const T* go = &output_grad.values[base];
      const T* xh = &cache.x_hat.values[base];
      T* gi = &g.input_grad.values[base];
      for (int64_t i = 0; i < plane; ++i) gi[i] = scale * (go[i] - k1 - xh[i] * k2);
    }
  });
  return g;
}

template <class T>
MaxPoolResult<T> maxpool2x2_forward(const TensorT<T>& input) {
  const int n = input.shape[0], c = input.shape[1], h = input.shape[2], w = input.shape[3];
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2x2: spatial extents must be even, got " + input.dims());
  }
  const int oh = h / 2, ow = w / 2;
  MaxPoolResult<T> r;
  r.output = TensorT<T>({n, c, oh, ow});
  r.argmax.assign(r.output.numel(), 0);
  parallel_for(static_cast<int64_t>(n) * c, input.numel(), [&](int64_t job) {
    const T* ip = &input.values[job * h * w];
    T* op = &r.output.values[job * oh * ow];
    int64_t* ap = &r.argmax[job * oh * ow];
    const int64_t plane_base = job * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int iy = oy * 2, ix = ox * 2;
        // row-major scan; strict > keeps the first maximum on ties
        int64_t best_idx = static_cast<int64_t>(iy) * w + ix;
        T best = ip[best_idx];
        const int64_t cands[3] = {static_cast<int64_t>(iy) * w + ix + 1,
                                  static_cast<int64_t>(iy + 1) * w + ix,
                                  static_cast<int64_t>(iy + 1) * w + ix + 1};
        for (int64_t idx : cands) {
          if (ip[idx] > best) {
            best = ip[idx];
            best_idx = idx;
          }
        }
        op[static_cast<int64_t>(oy) * ow + ox] = best;
        ap[static_cast<int64_t>(oy) * ow + ox] = plane_base + best_idx;
      }
    }
  });
  return r;
}

template <class T>
TensorT<T> maxpool2x2_backward(const TensorT<T>& output_grad, const std::vector<int64_t>& argmax,
                               const std::vector<int>& input_shape) {
  if (static_cast<int64_t>(argmax.size()) != output_grad.numel()) {
    throw UsageError("maxpool2x2_backward: argmax cache does not match output_grad");
  }
  TensorT<T> gin(input_shape);
  for (int64_t i = 0; i < output_grad.numel(); ++i) {
    gin.values[argmax[i]] += output_grad.values[i];
  }
  return gin;
}

template <class T>
TensorT<T> concat_channels(const std::vector<const TensorT<T>*>& inputs) {
  if (inputs.empty()) throw UsageError("concat: no inputs");
  const int n = inputs[0]->shape[0], h = inputs[0]->shape[2], w = inputs[0]->shape[3];
  int c = 0;
  for (const auto* t : inputs) {
    if (t->rank() != 4 || t->shape[0] != n || t->shape[2] != h || t->shape[3] != w) {
      throw ShapeError("concat: input " + t->dims() + " does not match " + inputs[0]->dims() +
                       " outside the channel axis");
    }
    c += t->shape[1];
  }
  TensorT<T> out({n, c, h, w});
  const int64_t plane = static_cast<int64_t>(h) * w;
  for (int in_n = 0; in_n < n; ++in_n) {
    int64_t off = (static_cast<int64_t>(in_n) * c) * plane;
    for (const auto* t : inputs) {
      const int64_t sz = static_cast<int64_t>(t->shape[1]) * plane;
      std::copy_n(&t->values[static_cast<int64_t>(in_n) * sz], sz, &out.values[off]);
      off += sz;
    }
  }
  return out;
}

template <class T>
std::vector<TensorT<T>> concat_channels_backward(const TensorT<T>& output_grad,
                                                 const std::vector<const TensorT<T>*>& inputs) {
  std::vector<TensorT<T>> grads;
  grads.reserve(inputs.size());
  for (const auto* t : inputs) grads.emplace_back(t->shape);
  const int n = output_grad.shape[0], c = output_grad.shape[1];
  const int64_t plane = static_cast<int64_t>(output_grad.shape[2]) * output_grad.shape[3];
  for (int in_n = 0; in_n < n; ++in_n) {
    int64_t off = (static_cast<int64_t>(in_n) * c) * plane;
    for (size_t k = 0; k < inputs.size(); ++k) {
      const int64_t sz = static_cast<int64_t>(inputs[k]->shape[1]) * plane;
      std::copy_n(&output_grad.values[off], sz,
                  &grads[k].values[static_cast<int64_t>(in_n) * sz]);
      off += sz;
    }
  }
  return grads;
}

template <class T>
TensorT<T> add_forward(const TensorT<T>& a, const TensorT<T>& b) {
  require_same_shape(a, b, "add");
  TensorT<T> out(a.shape);
  for (int64_t i = 0; i < a.numel(); ++i) out.values[i] = a.values[i] + b.values[i];
  return out;
}

#define BDFF_INSTANTIATE(T)                                                                       \
  template TensorT<T> conv2d_forward<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, \
                                        int, int);                                               \
  template ConvGrads<T> conv2d_backward<T>(const TensorT<T>&, const TensorT<T>&,                 \
                                           const TensorT<T>&, int, int);                         \
  template TensorT<T> deconv2d_forward<T>(const TensorT<T>&, const TensorT<T>&,                  \
                                          const TensorT<T>&, int);                               \
  template ConvGrads<T> deconv2d_backward<T>(const TensorT<T>&, const TensorT<T>&,               \
                                             const TensorT<T>&, int);                            \
  template TensorT<T> prelu_forward<T>(const TensorT<T>&, const TensorT<T>&);                    \
  template PreluGrads<T> prelu_backward<T>(const TensorT<T>&, const TensorT<T>&,                 \
                                           const TensorT<T>&);                                   \
  template TensorT<T> batchnorm_forward<T>(const TensorT<T>&, const TensorT<T>&,                 \
                                           const TensorT<T>&, BatchNormState<T>&, Mode,          \
                                           BatchNormCache<T>*);                                  \
  template BatchNormGrads<T> batchnorm_backward<T>(const TensorT<T>&, const TensorT<T>&,         \
                                                   const BatchNormCache<T>&);                    \
  template MaxPoolResult<T> maxpool2x2_forward<T>(const TensorT<T>&);                            \
  template TensorT<T> maxpool2x2_backward<T>(const TensorT<T>&, const std::vector<int64_t>&,     \
                                             const std::vector<int>&);                           \
  template TensorT<T> concat_channels<T>(const std::vector<const TensorT<T>*>&);                 \
  template std::vector<TensorT<T>> concat_channels_backward<T>(                                  \
      const TensorT<T>&, const std::vector<const TensorT<T>*>&);                                 \
  template TensorT<T> add_forward<T>(const TensorT<T>&, const TensorT<T>&);

BDFF_INSTANTIATE(float)
BDFF_INSTANTIATE(double)

#undef BDFF_INSTANTIATE

}  // namespace bdff::nn
