#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "spf/gradcheck.hpp"
#include "spf/ops.hpp"

using namespace spf;

namespace {

// Random values with pairwise gaps well above the finite-difference step,
// so kinked ops (maxpool, relu) stay locally smooth under perturbation.
TensorD separated_tensor(std::vector<int> shape, Prng& rng) {
  TensorD t(std::move(shape));
  const auto n = static_cast<std::size_t>(t.numel());
  for (std::size_t i = 0; i < n; ++i) {
    double base = (static_cast<double>((i * 37) % n) / static_cast<double>(n)) * 2.0 - 1.0;
    if (std::abs(base) < 0.01) base += 0.02;
    t.data[i] = base + rng.uniform(-1e-4, 1e-4);
  }
  return t;
}

}  // namespace

TEST_CASE("backward of sum is all-ones") {
  Tape<float> t;
  auto x = t.leaf(TensorF::full({2, 3, 3}, 0.5f));
  auto loss = sum_all(x);
  auto grads = t.backward(loss);
  TensorF gx = grads.at(x);
  REQUIRE(gx.shape == t.val(x).shape);
  for (std::int64_t i = 0; i < gx.numel(); ++i) CHECK(gx[i] == 1.0f);
}

TEST_CASE("parameter unused by the loss gets a zero gradient of its own shape") {
  Tape<float> t;
  auto x = t.leaf(TensorF::full({4}, 1.0f));
  auto unused = t.leaf(TensorF::full({3, 2}, 5.0f));
  auto loss = sum_all(x);
  auto grads = t.backward(loss);
  TensorF gu = grads.at(unused);
  REQUIRE(gu.shape == std::vector<int>{3, 2});
  for (std::int64_t i = 0; i < gu.numel(); ++i) CHECK(gu[i] == 0.0f);
}

TEST_CASE("backward rejects non-scalar losses") {
  Tape<float> t;
  auto x = t.leaf(TensorF::full({4}, 1.0f));
  CHECK_THROWS_AS(t.backward(x), ShapeError);
}

TEST_CASE("relu gradient at exactly zero is zero by convention") {
  Tape<float> t;
  auto x = t.leaf(TensorF({3}, {-1.0f, 0.0f, 1.0f}));
  auto loss = sum_all(relu(x));
  auto grads = t.backward(loss);
  TensorF gx = grads.at(x);
  CHECK(gx[0] == 0.0f);
  CHECK(gx[1] == 0.0f);
  CHECK(gx[2] == 1.0f);
}

TEST_CASE("conv2d gradients match finite differences") {
  Prng rng(11);
  NamedInputs inputs = {
      {"x", random_tensor({1, 8, 8}, rng)},
      {"w", random_tensor({4, 1, 3, 3}, rng)},
      {"b", random_tensor({4}, rng)},
  };
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return sum_all(conv2d(v[0], v[1], v[2], 1, 1, Pad::Same));
  });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("dilated strided conv2d gradients match finite differences") {
  Prng rng(12);
  NamedInputs inputs = {
      {"x", random_tensor({2, 9, 9}, rng)},
      {"w", random_tensor({3, 2, 3, 3}, rng)},
      {"b", random_tensor({3}, rng)},
  };
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return sum_all(conv2d(v[0], v[1], v[2], 2, 2, Pad::Same));
  });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("maxpool2d gradient matches finite differences") {
  Prng rng(13);
  NamedInputs inputs = {{"x", separated_tensor({2, 4, 4}, rng)}};
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return sum_all(maxpool2d(v[0], 2, 2));
  });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("avgpool_to_grid gradient matches finite differences") {
  Prng rng(14);
  NamedInputs inputs = {{"x", random_tensor({1, 4, 4}, rng)}};
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return sum_all(avgpool_to_grid(v[0], 2));
  });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("upsample_nearest gradient matches finite differences") {
  Prng rng(15);
  NamedInputs inputs = {{"x", random_tensor({1, 2, 2}, rng)}};
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return sum_all(upsample_nearest(v[0], 3));
  });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("dense gradient matches finite differences") {
  Prng rng(16);
  NamedInputs inputs = {
      {"x", random_tensor({4}, rng)},
      {"w", random_tensor({3, 4}, rng)},
      {"b", random_tensor({3}, rng)},
  };
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return sum_all(dense(v[0], v[1], v[2]));
  });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("sigmoid gradient at -2, 0, 2 is tight") {
  NamedInputs inputs = {{"x", TensorD({3}, {-2.0, 0.0, 2.0})}};
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return sum_all(sigmoid(v[0]));
  });
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("mse gradient is tight") {
  Prng rng(17);
  NamedInputs inputs = {
      {"a", random_tensor({6}, rng)},
      {"b", random_tensor({6}, rng)},
  };
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    return mse(v[0], v[1]);
  });
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("bce_with_logits gradient matches finite differences") {
  Prng rng(18);
  TensorD y({6});
  for (int i = 0; i < 6; ++i) y[i] = rng.next_unit() < 0.5 ? 0.0 : 1.0;
  NamedInputs inputs = {{"z", random_tensor({6}, rng)}};
  auto report = grad_check(inputs, [y](Tape<double>& t, const std::vector<Var<double>>& v) {
    return bce_with_logits(v[0], y);
  });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("spatial_dropout gradient with a fixed mask") {
  Prng rng(19);
  NamedInputs inputs = {{"x", random_tensor({6, 3, 3}, rng)}};
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    Prng drop = Prng::derive(5, Stream::Dropout);  // same mask on every evaluation
    return sum_all(spatial_dropout(v[0], 0.5, Mode::Train, drop));
  });
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("structural ops route gradients exactly") {
  Prng rng(20);
  NamedInputs inputs = {{"x", random_tensor({3, 4, 4}, rng)}};
  auto report = grad_check(inputs, [](Tape<double>& t, const std::vector<Var<double>>& v) {
    std::vector<Var<double>> maps;
    for (int c = 0; c < 3; ++c) maps.push_back(slice_channel(v[0], c));
    auto stacked = stack_channels(maps);
    auto flat = reshape(stacked, {3 * 4 * 4});
    return sum_all(scale(flat, 0.5));
  });
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("composite op chains pass gradient checks across 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Prng rng(seed);
    NamedInputs inputs = {
        {"x", separated_tensor({2, 8, 8}, rng)},
        {"w1", random_tensor({4, 2, 3, 3}, rng)},
        {"b1", random_tensor({4}, rng)},
        {"w2", random_tensor({3, 4 * 4 * 4}, rng)},
        {"b2", random_tensor({3}, rng)},
    };
    TensorD y({3});
    for (int i = 0; i < 3; ++i) y[i] = rng.next_unit() < 0.5 ? 0.0 : 1.0;
    auto report = grad_check(inputs, [y](Tape<double>& t, const std::vector<Var<double>>& v) {
      auto h = relu(conv2d(v[0], v[1], v[2], 1, 1, Pad::Same));
      auto p = maxpool2d(h, 2, 2);
      auto flat = reshape(p, {4 * 4 * 4});
      auto z = dense(flat, v[3], v[4]);
      return bce_with_logits(z, y);
    });
    CAPTURE(seed);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("forward evaluation is bit-identical across two runs") {
  auto run = [] {
    Prng rng = Prng::derive(77, Stream::Init);
    Tape<float> t;
    auto x = t.leaf(TensorF::uniform_fan_in({2, 6, 6}, 18, rng));
    auto w = t.leaf(TensorF::uniform_fan_in({3, 2, 3, 3}, 18, rng));
    auto b = t.leaf(TensorF::zeros({3}));
    Prng drop = Prng::derive(77, Stream::Dropout);
    auto y = spatial_dropout(relu(conv2d(x, w, b, 1, 1, Pad::Same)), 0.3, Mode::Train, drop);
    return t.val(y).data;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
