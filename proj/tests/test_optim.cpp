#include <doctest.h>

#include <cmath>

#include "metadapt/errors.hpp"
#include "metadapt/optim.hpp"

using namespace metadapt;

namespace {
ParamSet scalar_params(double w) {
  ParamSet p;
  p.add("w", Tensor::vector({w}));
  return p;
}
}  // namespace

TEST_CASE("sgd_step examples") {
  ParamSet params = scalar_params(1.0);
  ParamSet grads = scalar_params(2.0);

  ParamSet unchanged = sgd_step(params, grads, 0.0);
  CHECK(unchanged.at("w")[0] == 1.0);
  CHECK(params.at("w")[0] == 1.0);  // inputs untouched

  ParamSet stepped = sgd_step(params, grads, 0.5);
  CHECK(stepped.at("w")[0] == doctest::Approx(0.0));

  // two quarter steps equal one half step for constant grads
  ParamSet twice = sgd_step(sgd_step(params, grads, 0.25), grads, 0.25);
  CHECK(twice.at("w")[0] == stepped.at("w")[0]);
}

TEST_CASE("sgd_step rejects mismatched sets") {
  ParamSet params = scalar_params(1.0);
  ParamSet other;
  other.add("v", Tensor::vector({1.0}));
  CHECK_THROWS_AS(sgd_step(params, other, 0.1), DimensionError);
}

TEST_CASE("adam_step zero gradient leaves params unchanged") {
  ParamSet params = scalar_params(0.7);
  ParamSet grads = scalar_params(0.0);
  AdamState state = AdamState::init(params);
  auto [next, next_state] = adam_step(params, grads, state, 0.1);
  CHECK(next.at("w")[0] == 0.7);
  CHECK(next_state.step_count == 1);
}

TEST_CASE("adam_step first step closed form") {
  // First bias-corrected step: m_hat = g, v_hat = g^2, so the update is
  // -eta * g / (|g| + eps); at g=1 that is -0.1 to within 1e-9.
  ParamSet params = scalar_params(0.0);
  ParamSet grads = scalar_params(1.0);
  AdamState state = AdamState::init(params);
  auto [next, next_state] = adam_step(params, grads, state, 0.1);
  CHECK(std::abs(next.at("w")[0] - (-0.1)) <= 1e-9);

  // direction is sign-consistent with the gradient
  auto [neg, _] = adam_step(params, scalar_params(-3.0), state, 0.1);
  CHECK(neg.at("w")[0] > 0.0);
}

TEST_CASE("optimizer steps are pure") {
  ParamSet params = scalar_params(0.3);
  ParamSet grads = scalar_params(0.9);
  AdamState state = AdamState::init(params);
  auto [a1, s1] = adam_step(params, grads, state, 0.01);
  auto [a2, s2] = adam_step(params, grads, state, 0.01);
  CHECK(a1.at("w")[0] == a2.at("w")[0]);
  CHECK(s1.first_moment.at("w")[0] == s2.first_moment.at("w")[0]);
  CHECK(sgd_step(params, grads, 0.01).at("w")[0] == sgd_step(params, grads, 0.01).at("w")[0]);
}
