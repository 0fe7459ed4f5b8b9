#pragma once

#include <string>
#include <vector>

#include "spf/tape.hpp"

namespace spf {

// Named parameter tensors in a fixed registration order. The order is the
// contract: optimizer state, gradients and checkpoints all align by index.
template <typename T>
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor<T>> tensors;

  int add(std::string name, Tensor<T> t) {
    names.push_back(std::move(name));
    tensors.push_back(std::move(t));
    return static_cast<int>(tensors.size()) - 1;
  }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  std::size_t count() const { return tensors.size(); }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    out.names = names;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }
};

// Parameters bound onto a tape for one forward pass; vars align with the
// ParamSet registration order.
template <typename T>
struct BoundParams {
  std::vector<Var<T>> vars;
  Var<T> operator[](int i) const { return vars[static_cast<std::size_t>(i)]; }
};

template <typename T>
BoundParams<T> bind(Tape<T>& tape, const ParamSet<T>& ps) {
  BoundParams<T> bp;
  bp.vars.reserve(ps.tensors.size());
  for (const auto& t : ps.tensors) bp.vars.push_back(tape.leaf(t));
  return bp;
}

// Reference to one conv layer's weight/bias slots in a ParamSet.
struct ConvRef {
  int w = -1;
  int b = -1;
};

template <typename T>
ConvRef add_conv(ParamSet<T>& ps, const std::string& name, int c_out, int c_in, int k, Prng& rng) {
  ConvRef ref;
  ref.w = ps.add(name + ".w", Tensor<T>::uniform_fan_in({c_out, c_in, k, k}, c_in * k * k, rng));
  ref.b = ps.add(name + ".b", Tensor<T>::zeros({c_out}));
  return ref;
}

struct DenseRef {
  int w = -1;
  int b = -1;
};

template <typename T>
DenseRef add_dense(ParamSet<T>& ps, const std::string& name, int m, int n, Prng& rng) {
  DenseRef ref;
  ref.w = ps.add(name + ".w", Tensor<T>::uniform_fan_in({m, n}, n, rng));
  ref.b = ps.add(name + ".b", Tensor<T>::zeros({m}));
  return ref;
}

}  // namespace spf
