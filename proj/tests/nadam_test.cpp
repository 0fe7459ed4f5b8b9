#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "spf/nadam.hpp"

using namespace spf;

TEST_CASE("zero gradient with zero state leaves parameters unchanged") {
  std::vector<TensorD> params = {TensorD({3}, {1.0, -2.0, 0.5})};
  std::vector<TensorD> grads = {TensorD::zeros({3})};
  NadamState<double> st;
  st.init(params);
  nadam_step(params, grads, st);
  CHECK(params[0][0] == 1.0);
  CHECK(params[0][1] == -2.0);
  CHECK(params[0][2] == 0.5);
  CHECK(st.t == 1);
}

TEST_CASE("positive gradient decreases the parameter") {
  std::vector<TensorD> params = {TensorD::scalar(1.0)};
  std::vector<TensorD> grads = {TensorD::scalar(1.0)};
  NadamState<double> st;
  st.init(params);
  nadam_step(params, grads, st);
  CHECK(params[0][0] < 1.0);
}

TEST_CASE("five steps match a straight-line transcription of the update") {
  std::vector<TensorD> params = {TensorD::scalar(1.0)};
  NadamState<double> st;
  st.hyper = {0.1, 0.9, 0.999, 1e-8};
  st.init(params);

  // Independent scripted reference: the same equations written out flat.
  double theta = 1.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 1.0;
  for (int t = 1; t <= 5; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double bc1 = 1 - std::pow(b1, t);
    const double bc2 = 1 - std::pow(b2, t);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    theta -= lr * (b1 * m_hat + (1 - b1) * g / bc1) / (std::sqrt(v_hat) + eps);

    std::vector<TensorD> grads = {TensorD::scalar(1.0)};
    nadam_step(params, grads, st);
    CHECK(params[0][0] == doctest::Approx(theta).epsilon(1e-9));
  }
  CHECK(st.t == 5);
}

TEST_CASE("non-finite gradients are rejected") {
  std::vector<TensorD> params = {TensorD::scalar(1.0)};
  std::vector<TensorD> grads = {TensorD::scalar(std::numeric_limits<double>::quiet_NaN())};
  NadamState<double> st;
  st.init(params);
  CHECK_THROWS_AS(nadam_step(params, grads, st), NumericError);
  CHECK(st.t == 0);
}

TEST_CASE("step counter overflow is rejected") {
  std::vector<TensorD> params = {TensorD::scalar(1.0)};
  std::vector<TensorD> grads = {TensorD::scalar(0.5)};
  NadamState<double> st;
  st.init(params);
  st.t = std::numeric_limits<std::int64_t>::max() - 1;
  CHECK_THROWS_AS(nadam_step(params, grads, st), NumericError);
}

TEST_CASE("moment shapes track their parameters and t increases by one") {
  std::vector<TensorF> params = {TensorF::zeros({2, 3}), TensorF::zeros({4})};
  NadamState<float> st;
  st.init(params);
  REQUIRE(st.m.size() == 2);
  CHECK(st.m[0].shape == params[0].shape);
  CHECK(st.v[1].shape == params[1].shape);
  std::vector<TensorF> grads = {TensorF::full({2, 3}, 0.1f), TensorF::full({4}, -0.2f)};
  for (int i = 1; i <= 3; ++i) {
    nadam_step(params, grads, st);
    CHECK(st.t == i);
  }
  std::vector<TensorF> bad = {TensorF::full({2, 3}, 0.1f), TensorF::full({5}, 0.0f)};
  CHECK_THROWS_AS(nadam_step(params, bad, st), ShapeError);
}
