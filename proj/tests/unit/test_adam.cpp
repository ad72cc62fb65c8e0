#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "helpers.hpp"
#include "tabfuse/adam.hpp"
#include "tabfuse/errors.hpp"
#include "tabfuse/ops.hpp"

using namespace tabfuse;

namespace {
Tensor param(double v) {
  Matrix m(1, 1);
  m << v;
  return Tensor::leaf(m, true, "p");
}

void seed_grad(Tensor& p, double g) {
  Matrix gm(1, 1);
  gm << g;
  p.node()->accumulate(gm);
}
}  // namespace

TEST_CASE("first Adam step applies the bias-corrected update") {
  Tensor p = param(1.0);
  seed_grad(p, 1.0);
  Adam opt(1e-3);
  std::vector<Tensor> params{p};
  opt.step(params);
  // After bias correction m_hat = v_hat = 1, so the step is lr/(1 + eps).
  const double want = 1.0 - 1e-3 / (1.0 + 1e-8);
  CHECK(p.value()(0, 0) == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("two steps with constant gradient keep a unit-magnitude direction") {
  Tensor p = param(0.0);
  Adam opt(0.1);
  std::vector<Tensor> params{p};
  for (int t = 1; t <= 2; ++t) {
    p.zero_grad();
    seed_grad(p, 2.0);
    opt.step(params);
  }
  // With a constant gradient, m_hat/sqrt(v_hat) stays 1 regardless of the
  // gradient scale, so each step moves by ~lr.
  CHECK(p.value()(0, 0) == doctest::Approx(-0.2).epsilon(1e-6));
}

TEST_CASE("weight decay is decoupled from the gradient path") {
  Tensor p = param(2.0);
  Adam opt(0.5, 0.9, 0.999, 1e-8, /*weight_decay=*/0.1);
  std::vector<Tensor> params{p};
  // No gradient at all: grad_ready=false counts as a zero gradient, so only
  // the decay term theta -= lr * wd * theta fires.
  opt.step(params);
  CHECK(p.value()(0, 0) == doctest::Approx(2.0 - 0.5 * 0.1 * 2.0).epsilon(1e-12));
}

TEST_CASE("Adam state follows the node, not the slot index") {
  Tensor a = param(0.0);
  Tensor b = param(0.0);
  Adam opt(0.1);
  std::vector<Tensor> both{a, b};
  a.zero_grad();
  seed_grad(a, 1.0);
  opt.step(both);
  const double after_one = a.value()(0, 0);
  // Reordering the parameter list must not disturb per-node moments.
  std::vector<Tensor> swapped{b, a};
  a.zero_grad();
  seed_grad(a, 1.0);
  opt.step(swapped);
  CHECK(a.value()(0, 0) < after_one);  // second step continues the descent
  CHECK(b.value()(0, 0) == 0.0);       // b never had a gradient and no decay
}

TEST_CASE("non-finite gradients abort with the parameter name") {
  Tensor p = param(1.0);
  p.set_name("enc0.wq");
  seed_grad(p, std::numeric_limits<double>::quiet_NaN());
  Adam opt(1e-3);
  std::vector<Tensor> params{p};
  try {
    opt.step(params);
    FAIL("expected TrainError");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("enc0.wq") != std::string::npos);
  }
}

TEST_CASE("constructor validates hyperparameters") {
  CHECK_THROWS_AS(Adam(-1.0), ArgumentError);
  CHECK_THROWS_AS(Adam(1e-3, 1.5), ArgumentError);
  CHECK_THROWS_AS(Adam(1e-3, 0.9, -0.1), ArgumentError);
}
