#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spf/tape.hpp"

namespace spf {

// Analytic-vs-numeric gradient comparison. The checked computation is
// rebuilt in double precision for every evaluation, so the forward pass
// must be a deterministic function of the named inputs.

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_err = 0.0;
  std::string worst;

  bool pass(double tol) const { return max_rel_err < tol; }
};

using NamedInputs = std::vector<std::pair<std::string, TensorD>>;

// build(tape, leaves) must return a scalar loss on `tape`, with leaves[i]
// bound to inputs[i]. Central differences with step h; relative error is
// |ga-gn| / max(1, |ga|, |gn|).
inline GradCheckReport grad_check(
    const NamedInputs& inputs,
    const std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>& build,
    double h = 1e-5) {
  auto eval = [&](const NamedInputs& pt) {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    leaves.reserve(pt.size());
    for (const auto& [name, v] : pt) leaves.push_back(tape.leaf(v));
    Var<double> loss = build(tape, leaves);
    return tape.val(loss)[0];
  };

  // Analytic gradients, one backward pass.
  Tape<double> tape;
  std::vector<Var<double>> leaves;
  for (const auto& [name, v] : inputs) leaves.push_back(tape.leaf(v));
  Var<double> loss = build(tape, leaves);
  auto grads = tape.backward(loss);

  GradCheckReport report;
  NamedInputs pt = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    TensorD analytic = grads.at(leaves[i]);
    GradCheckGroup group{inputs[i].first, 0.0};
    for (std::int64_t j = 0; j < analytic.numel(); ++j) {
      const double orig = pt[i].second[j];
      pt[i].second[j] = orig + h;
      const double fp = eval(pt);
      pt[i].second[j] = orig - h;
      const double fm = eval(pt);
      pt[i].second[j] = orig;
      const double gn = (fp - fm) / (2.0 * h);
      const double ga = analytic[j];
      const double rel =
          std::abs(ga - gn) / std::max({1.0, std::abs(ga), std::abs(gn)});
      if (rel > group.max_rel_err) group.max_rel_err = rel;
    }
    if (group.max_rel_err > report.max_rel_err) {
      report.max_rel_err = group.max_rel_err;
      report.worst = group.name;
    }
    report.groups.push_back(std::move(group));
  }
  return report;
}

// Random tensor with entries in (-1, 1); shared by tests and the
// gradcheck command.
inline TensorD random_tensor(std::vector<int> shape, Prng& rng) {
  TensorD t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace spf
