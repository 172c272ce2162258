#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdff/rng.hpp"
#include "bdff/tensor.hpp"

namespace bdff::nn {

// Mean square error with L2 regularization:
//   (1/N) * sum_i ||pred_i - target_i||^2 + (lambda/2) * ||theta||^2
// where N is the number of samples in the batch (pred.shape[0]).
template <class T>
T mse_l2_loss(const TensorT<T>& pred, const TensorT<T>& target,
              const std::vector<const TensorT<T>*>& params, double lambda);

// Gradient of the data term w.r.t. pred: 2 (pred - target) / N, scaled by
// `weight` (used to average multiple supervision taps).
template <class T>
TensorT<T> mse_grad(const TensorT<T>& pred, const TensorT<T>& target, double weight = 1.0);

// Adds the regularizer gradient lambda * theta into each parameter's grad.
template <class T>
void add_l2_grad(std::vector<TensorT<T>*>& params, double lambda);

// Adam with bias correction. Weight decay is not applied here; the lambda
// term of the loss contributes lambda * theta through add_l2_grad.
struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.002;  // recorded; applied through the loss
};

template <class T>
struct AdamState {
  AdamConfig config;
  std::vector<TensorT<T>> m;  // first moments, one per parameter
  std::vector<TensorT<T>> v;  // second moments
  int64_t step = 0;

  // Moment buffers are created lazily to match the parameter shapes.
  void init(const std::vector<TensorT<T>*>& params);
};

// One update over all parameters (reads param.grad). `names` is used in the
// non-finite-gradient diagnostic and must parallel `params`.
template <class T>
void adam_step(std::vector<TensorT<T>*>& params, AdamState<T>& state,
               const std::vector<std::string>& names);

// Zero-mean Gaussian with variance 2/fan_in, seeded.
template <class T>
TensorT<T> he_init(const std::vector<int>& shape, int64_t fan_in, uint64_t rng_seed);

}  // namespace bdff::nn
