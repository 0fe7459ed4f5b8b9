#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "spf/tensor.hpp"

namespace spf {

struct NadamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Nadam with constant beta1. Moments are kept per parameter with the
// parameter's shape; t counts completed steps.
template <typename T>
struct NadamState {
  NadamHyper hyper;
  std::int64_t t = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  void init(const std::vector<Tensor<T>>& params) {
    t = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(Tensor<T>::zeros(p.shape));
      v.push_back(Tensor<T>::zeros(p.shape));
    }
  }
};

// One update:
//   m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g^2
//   m_hat = m/(1-b1^t)            v_hat = v/(1-b2^t)
//   theta <- theta - lr*(b1*m_hat + (1-b1)*g/(1-b1^t)) / (sqrt(v_hat)+eps)
template <typename T>
void nadam_step(std::vector<Tensor<T>>& params, const std::vector<Tensor<T>>& grads,
                NadamState<T>& st) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw ShapeError("nadam_step: params/grads/state counts disagree");
  if (st.t >= std::numeric_limits<std::int64_t>::max() - 1)
    throw NumericError("nadam_step: step counter overflow");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(st.m[i]))
      throw ShapeError("nadam_step: shape mismatch at parameter " + std::to_string(i));
    if (!grads[i].all_finite())
      throw NumericError("nadam_step: non-finite gradient at parameter " + std::to_string(i));
  }

  st.t += 1;
  const double b1 = st.hyper.beta1, b2 = st.hyper.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i];
    const Tensor<T>& g = grads[i];
    Tensor<T>& m = st.m[i];
    Tensor<T>& v = st.v[i];
    for (std::int64_t j = 0; j < p.numel(); ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / bc1;
      const double v_hat = vj / bc2;
      const double update = st.hyper.lr * (b1 * m_hat + (1.0 - b1) * gj / bc1) /
                            (std::sqrt(v_hat) + st.hyper.eps);
      p[j] = static_cast<T>(static_cast<double>(p[j]) - update);
    }
  }
}

}  // namespace spf
