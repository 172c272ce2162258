#include "bdff/optim.hpp"

#include <cmath>

#include "bdff/errors.hpp"

namespace bdff::nn {

template <class T>
T mse_l2_loss(const TensorT<T>& pred, const TensorT<T>& target,
              const std::vector<const TensorT<T>*>& params, double lambda) {
  require_same_shape(pred, target, "mse_l2_loss");
  if (lambda < 0.0) throw DomainError("mse_l2_loss: lambda must be >= 0");
  const int64_t batch = pred.shape.empty() ? 1 : pred.shape[0];
  T data = T(0);
  for (int64_t i = 0; i < pred.numel(); ++i) {
    const T d = pred.values[i] - target.values[i];
    data += d * d;
  }
  data /= static_cast<T>(batch);
  T reg = T(0);
  if (lambda > 0.0) {
    for (const auto* p : params) {
      for (const T v : p->values) reg += v * v;
    }
    reg *= static_cast<T>(lambda) / T(2);
  }
  return data + reg;
}

template <class T>
TensorT<T> mse_grad(const TensorT<T>& pred, const TensorT<T>& target, double weight) {
  require_same_shape(pred, target, "mse_grad");
  const int64_t batch = pred.shape.empty() ? 1 : pred.shape[0];
  const T k = static_cast<T>(2.0 * weight / static_cast<double>(batch));
  TensorT<T> g(pred.shape);
  for (int64_t i = 0; i < pred.numel(); ++i) {
    g.values[i] = k * (pred.values[i] - target.values[i]);
  }
  return g;
}

template <class T>
void add_l2_grad(std::vector<TensorT<T>*>& params, double lambda) {
  if (lambda == 0.0) return;
  const T l = static_cast<T>(lambda);
  for (auto* p : params) {
    p->ensure_grad();
    for (int64_t i = 0; i < p->numel(); ++i) p->grad[i] += l * p->values[i];
  }
}

template <class T>
void AdamState<T>::init(const std::vector<TensorT<T>*>& params) {
  m.clear();
  v.clear();
  for (const auto* p : params) {
    m.emplace_back(p->shape);
    v.emplace_back(p->shape);
  }
  step = 0;
}

template <class T>
void adam_step(std::vector<TensorT<T>*>& params, AdamState<T>& state,
               const std::vector<std::string>& names) {
  if (state.m.size() != params.size()) state.init(params);
  ++state.step;
  const double b1 = state.config.beta1, b2 = state.config.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t k = 0; k < params.size(); ++k) {
    TensorT<T>& p = *params[k];
    if (!p.has_grad()) throw UsageError("adam_step: parameter has no gradient: " + names.at(k));
    TensorT<T>& m = state.m[k];
    TensorT<T>& v = state.v[k];
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      if (!std::isfinite(g)) {
        throw DomainError("adam_step: non-finite gradient in parameter " + names.at(k) +
                          " at element " + std::to_string(i));
      }
      const double mi = b1 * static_cast<double>(m.values[i]) + (1.0 - b1) * g;
      const double vi = b2 * static_cast<double>(v.values[i]) + (1.0 - b2) * g * g;
      m.values[i] = static_cast<T>(mi);
      v.values[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p.values[i] -= static_cast<T>(state.config.lr * mhat / (std::sqrt(vhat) + state.config.eps));
    }
  }
}

template <class T>
TensorT<T> he_init(const std::vector<int>& shape, int64_t fan_in, uint64_t rng_seed) {
  if (fan_in <= 0) throw DomainError("he_init: fan_in must be positive");
  TensorT<T> t(shape);
  RandomStream rng(rng_seed, "he_init");
  const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.values) v = static_cast<T>(rng.normal(0.0, sigma));
  return t;
}

#define BDFF_INSTANTIATE(T)                                                             \
  template T mse_l2_loss<T>(const TensorT<T>&, const TensorT<T>&,                      \
                            const std::vector<const TensorT<T>*>&, double);            \
  template TensorT<T> mse_grad<T>(const TensorT<T>&, const TensorT<T>&, double);       \
  template void add_l2_grad<T>(std::vector<TensorT<T>*>&, double);                     \
  template struct AdamState<T>;                                                        \
  template void adam_step<T>(std::vector<TensorT<T>*>&, AdamState<T>&,                 \
                             const std::vector<std::string>&);                         \
  template TensorT<T> he_init<T>(const std::vector<int>&, int64_t, uint64_t);

BDFF_INSTANTIATE(float)
BDFF_INSTANTIATE(double)

#undef BDFF_INSTANTIATE

}  // namespace bdff::nn
