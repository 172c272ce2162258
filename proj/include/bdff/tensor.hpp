#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "bdff/errors.hpp"

namespace bdff {

// N-dimensional array, N,C,H,W order for image data. `grad`, when non-empty,
// mirrors `values`. Training runs in float; the double instantiation backs
// the finite-difference gradient checks.
template <class T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty = absent

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    values.assign(numel_of(shape), T(0));
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int e : s) {
      if (e <= 0) throw ShapeError("tensor extent must be positive, got " + dims_str(s));
      n *= e;
    }
    return s.empty() ? 0 : n;
  }

  static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }

  static TensorT full(std::vector<int> s, T v) {
    TensorT t(std::move(s));
    std::fill(t.values.begin(), t.values.end(), v);
    return t;
  }

  static TensorT from(std::vector<int> s, std::vector<T> v) {
    TensorT t;
    t.shape = std::move(s);
    if (static_cast<int64_t>(v.size()) != numel_of(t.shape)) {
      throw ShapeError("value count " + std::to_string(v.size()) +
                       " does not match shape " + dims_str(t.shape));
    }
    t.values = std::move(v);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(values.size()); }
  int dim(int i) const { return shape.at(i); }
  int rank() const { return static_cast<int>(shape.size()); }

  // 4-D accessors (N,C,H,W).
  int64_t idx4(int n, int c, int h, int w) const {
    return ((static_cast<int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w;
  }
  T& at4(int n, int c, int h, int w) { return values[idx4(n, c, h, w)]; }
  const T& at4(int n, int c, int h, int w) const { return values[idx4(n, c, h, w)]; }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
  bool has_grad() const { return grad.size() == values.size() && !values.empty(); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  static std::string dims_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
  }
  std::string dims() const { return dims_str(shape); }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <class T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.dims() + " vs " + b.dims());
  }
}

}  // namespace bdff
