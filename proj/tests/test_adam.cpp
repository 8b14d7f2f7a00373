#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "ir2vis/adam.hpp"
#include "ir2vis/ops.hpp"

using namespace ir2vis;

TEST_CASE("zero gradient leaves parameters unchanged and advances t") {
  std::vector<Tensor<double>> params{
      Tensor<double>::from_vector({1, 1, 2, 2}, {1.0, -2.0, 3.0, 0.5}, true)};
  params[0].set_name("w");
  params[0].zero_grad();
  auto st = AdamState<double>::for_params(params);
  adam_step(params, st, 0.1);
  CHECK(st.t == 1);
  CHECK(params[0].values() == std::vector<double>{1.0, -2.0, 3.0, 0.5});
}

TEST_CASE("first-step update magnitude is approximately lr") {
  for (double g0 : {0.3, -1.7, 42.0}) {
    std::vector<Tensor<double>> params{scalar_tensor<double>(0.0, true)};
    auto st = AdamState<double>::for_params(params);
    auto grad_source = scalar_tensor<double>(g0);
    auto loss = weighted_sum(params[0], grad_source);  // dL/dw = g0
    params[0].zero_grad();
    backward(loss);
    adam_step(params, st, 0.1);
    // bias-corrected first step: lr * g / (|g| + eps) ~ lr * sign(g)
    CHECK(std::fabs(std::fabs(params[0].values()[0]) - 0.1) < 1e-6);
    CHECK(params[0].values()[0] * g0 < 0);  // moves against the gradient
  }
}

TEST_CASE("adam is scale-free in the gradient") {
  auto first_update = [](double g0) {
    std::vector<Tensor<double>> params{scalar_tensor<double>(0.0, true)};
    auto st = AdamState<double>::for_params(params);
    auto loss = weighted_sum(params[0], scalar_tensor<double>(g0));
    params[0].zero_grad();
    backward(loss);
    adam_step(params, st, 0.1);
    return params[0].values()[0];
  };
  const double u1 = first_update(0.37);
  const double u2 = first_update(37.0);
  CHECK(std::fabs(u1 - u2) < 1e-6);
}

TEST_CASE("100 steps on (w-3)^2 converge within 0.05") {
  std::vector<Tensor<double>> params{scalar_tensor<double>(0.0, true)};
  params[0].set_name("w");
  auto st = AdamState<double>::for_params(params);

  // independent scalar recurrence as the oracle
  double ow = 0.0, om = 0.0, ov = 0.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;

  for (int t = 1; t <= 100; ++t) {
    auto d = affine(params[0], 1.0, -3.0);
    auto loss = mul(d, d);
    params[0].zero_grad();
    backward(loss);
    adam_step(params, st, lr);

    const double g = 2 * (ow - 3.0);
    om = b1 * om + (1 - b1) * g;
    ov = b2 * ov + (1 - b2) * g * g;
    ow -= lr * (om / (1 - std::pow(b1, t))) /
          (std::sqrt(ov / (1 - std::pow(b2, t))) + eps);
    CHECK(params[0].values()[0] == doctest::Approx(ow).epsilon(1e-12));
  }
  CHECK(std::fabs(params[0].values()[0] - 3.0) < 0.05);
}

TEST_CASE("non-finite gradients raise an optimizer error naming the param") {
  std::vector<Tensor<double>> params{scalar_tensor<double>(1.0, true)};
  params[0].set_name("dec2.conv.w");
  auto st = AdamState<double>::for_params(params);
  auto inf = scalar_tensor<double>(std::numeric_limits<double>::infinity());
  auto loss = weighted_sum(params[0], inf);
  params[0].zero_grad();
  backward(loss);
  try {
    adam_step(params, st, 0.1);
    FAIL("expected OptimizerError");
  } catch (const OptimizerError& e) {
    CHECK(e.param_name == "dec2.conv.w");
  }
  CHECK_THROWS_AS(adam_step(params, st, 0.0), OptimizerError);
}
