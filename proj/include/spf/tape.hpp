#pragma once

#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "spf/tensor.hpp"

namespace spf {

template <typename T>
class Tape;

// Lightweight handle to a value on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode differentiation record. Values are appended in evaluation
// order; each non-leaf value carries a node with its operation tag, parent
// ids and a backward rule. Topological order holds by construction: a
// parent id is always smaller than its consumer's id.
template <typename T>
class Tape {
 public:
  // Accumulation buffers used during a backward traversal. Buffers are
  // allocated lazily so values off the path to the loss stay untouched.
  class Grads {
   public:
    explicit Grads(const Tape& tape) : tape_(&tape), buf_(tape.size()) {}

    // Mutable zero-initialized buffer for value `id`.
    Tensor<T>& accum(int id) {
      Tensor<T>& g = buf_[static_cast<std::size_t>(id)];
      if (g.data.empty()) g = Tensor<T>::zeros(tape_->val(id).shape);
      return g;
    }

    bool touched(int id) const { return !buf_[static_cast<std::size_t>(id)].data.empty(); }

    // Gradient for a value; zeros of the value's shape if it was not on
    // any path to the loss.
    Tensor<T> at(Var<T> v) const {
      const Tensor<T>& g = buf_[static_cast<std::size_t>(v.id)];
      if (g.data.empty()) return Tensor<T>::zeros(tape_->val(v.id).shape);
      return g;
    }
    const Tensor<T>& raw(int id) const { return buf_[static_cast<std::size_t>(id)]; }

   private:
    const Tape* tape_;
    std::vector<Tensor<T>> buf_;
  };

  using BackwardFn = std::function<void(const Tape&, const Tensor<T>& gout, Grads& grads)>;

  struct Node {
    const char* op;
    int out;
    std::vector<int> parents;
    BackwardFn backward;
  };

  Var<T> leaf(Tensor<T> v) {
    values_.push_back(std::move(v));
    return Var<T>{this, static_cast<int>(values_.size()) - 1};
  }

  Var<T> push(const char* op, std::vector<int> parents, Tensor<T> out, BackwardFn backward) {
    values_.push_back(std::move(out));
    const int id = static_cast<int>(values_.size()) - 1;
    nodes_.push_back(Node{op, id, std::move(parents), std::move(backward)});
    return Var<T>{this, id};
  }

  const Tensor<T>& val(int id) const { return values_[static_cast<std::size_t>(id)]; }
  const Tensor<T>& val(Var<T> v) const { return values_[static_cast<std::size_t>(v.id)]; }
  int size() const { return static_cast<int>(values_.size()); }

  // Reverse traversal from a scalar loss. Exactly one pass; nodes whose
  // output never received a gradient are skipped (their contribution is
  // zero by linearity).
  Grads backward(Var<T> loss) const {
    if (!loss.valid() || loss.tape != this)
      throw ShapeError("backward: loss is not a value on this tape");
    if (val(loss).numel() != 1)
      throw ShapeError("backward: loss must be scalar, got shape " + val(loss).shape_str());
    Grads grads(*this);
    grads.accum(loss.id)[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!grads.touched(it->out)) continue;
      it->backward(*this, grads.raw(it->out), grads);
    }
    return grads;
  }

 private:
  // deque: references returned by val() stay valid while ops append values.
  std::deque<Tensor<T>> values_;
  std::vector<Node> nodes_;
};

}  // namespace spf
