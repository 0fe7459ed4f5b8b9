#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "spf/error.hpp"
#include "spf/prng.hpp"

namespace spf {

// Dense n-dimensional array, row-major. Storage type is a template
// parameter: float for training/inference, double for the shadow
// evaluations used by gradient checks.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(checked_numel(shape), T(0)) {}
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::int64_t>(data.size()) != checked_numel(shape))
      throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str());
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  // Uniform fan-in init: U(-a, a) with a = sqrt(3 / fan_in).
  static Tensor uniform_fan_in(std::vector<int> s, int fan_in, Prng& rng) {
    Tensor t(std::move(s));
    const double a = std::sqrt(3.0 / static_cast<double>(fan_in < 1 ? 1 : fan_in));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-a, a));
    return t;
  }

  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }

  T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

  // Row-major element access for up to 4 dims; used by tests and kernels
  // that favor clarity over raw index math.
  T& at(int i) { return data[static_cast<std::size_t>(i)]; }
  T& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  T& at(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  T& at(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  const T& at(int i) const { return data[static_cast<std::size_t>(i)]; }
  const T& at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  const T& at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  const T& at(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  static std::int64_t checked_numel(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ShapeError("tensor: non-positive dimension " + std::to_string(d));
      n *= d;
    }
    return n;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace spf
