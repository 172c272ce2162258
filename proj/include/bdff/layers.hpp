#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bdff/tensor.hpp"

namespace bdff::nn {

enum class Mode {
  Train,  // batch statistics, running stats updated
  Check,  // batch statistics, running stats frozen (gradient checking)
  Infer,  // running statistics, deterministic
};

// ---------------------------------------------------------------------------
// Convolution. input N,C,H,W; weight OutC,C,kh,kw; zero padding.
// Output extents: floor((H + 2p - kh)/stride) + 1 (same for W).
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& weight,
                          const TensorT<T>& bias, int stride, int padding);

template <class T>
struct ConvGrads {
  TensorT<T> input_grad;
  TensorT<T> weight_grad;
  TensorT<T> bias_grad;
};

template <class T>
ConvGrads<T> conv2d_backward(const TensorT<T>& output_grad, const TensorT<T>& cached_input,
                             const TensorT<T>& weight, int stride, int padding);

// ---------------------------------------------------------------------------
// Transposed convolution. weight InC,OutC,kh,kw. Output extent is exactly
// stride * input extent, which requires (k - stride) even and >= 0; the
// excess (k - stride)/2 is cropped symmetrically. Adjoint of conv2d with
// padding = crop for matching kernels.
// ---------------------------------------------------------------------------

// Crop per side implied by (kernel, stride); throws ConfigError when the
// configuration cannot produce output extent = stride * input extent.
int deconv2d_crop(int kernel, int stride);

template <class T>
TensorT<T> deconv2d_forward(const TensorT<T>& input, const TensorT<T>& weight,
                            const TensorT<T>& bias, int stride);

template <class T>
ConvGrads<T> deconv2d_backward(const TensorT<T>& output_grad, const TensorT<T>& cached_input,
                               const TensorT<T>& weight, int stride);

// ---------------------------------------------------------------------------
// PReLU, one learnable slope per channel.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> prelu_forward(const TensorT<T>& input, const TensorT<T>& slope);

template <class T>
struct PreluGrads {
  TensorT<T> input_grad;
  TensorT<T> slope_grad;
};

template <class T>
PreluGrads<T> prelu_backward(const TensorT<T>& output_grad, const TensorT<T>& cached_input,
                             const TensorT<T>& slope);

// ---------------------------------------------------------------------------
// Batch normalization over N,H,W per channel.
// ---------------------------------------------------------------------------

template <class T>
struct BatchNormState {
  TensorT<T> running_mean;  // shape [C]
  TensorT<T> running_var;   // shape [C]
  int64_t num_updates = 0;
  double momentum = 0.9;  // keep factor for running stats
  double eps = 1e-5;
};

template <class T>
struct BatchNormCache {
  TensorT<T> x_hat;
  std::vector<T> inv_std;  // per channel
  std::vector<T> mean;
};

template <class T>
TensorT<T> batchnorm_forward(const TensorT<T>& input, const TensorT<T>& gamma,
                             const TensorT<T>& beta, BatchNormState<T>& state, Mode mode,
                             BatchNormCache<T>* cache);

template <class T>
struct BatchNormGrads {
  TensorT<T> input_grad;
  TensorT<T> gamma_grad;
  TensorT<T> beta_grad;
};

template <class T>
BatchNormGrads<T> batchnorm_backward(const TensorT<T>& output_grad, const TensorT<T>& gamma,
                                     const BatchNormCache<T>& cache);

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2, even extents required. Ties resolve to the
// first element in row-major scan order.
// ---------------------------------------------------------------------------

template <class T>
struct MaxPoolResult {
  TensorT<T> output;
  std::vector<int64_t> argmax;  // flat input index per output element
};

template <class T>
MaxPoolResult<T> maxpool2x2_forward(const TensorT<T>& input);

template <class T>
TensorT<T> maxpool2x2_backward(const TensorT<T>& output_grad, const std::vector<int64_t>& argmax,
                               const std::vector<int>& input_shape);

// ---------------------------------------------------------------------------
// Concat along channels / elementwise add.
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> concat_channels(const std::vector<const TensorT<T>*>& inputs);

template <class T>
std::vector<TensorT<T>> concat_channels_backward(const TensorT<T>& output_grad,
                                                 const std::vector<const TensorT<T>*>& inputs);

template <class T>
TensorT<T> add_forward(const TensorT<T>& a, const TensorT<T>& b);

}  // namespace bdff::nn
