#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fcnseg/optim.hpp"

using namespace fcnseg;
using optim::HyperOverrides;
using optim::OptimizerState;
using optim::Solver;

TEST_SUITE_BEGIN("optim");

namespace {

ValuePtr scalar_param(double w, double g, const std::string& name = "w") {
  auto p = make_leaf(Tensor::full({1}, w), true, name);
  p->grad = Tensor::full({1}, g);
  return p;
}

double step_once(Solver kind, double w, double g, const HyperOverrides& o = {}) {
  auto state = optim::make_state(kind, o);
  auto p = scalar_param(w, g);
  optim::apply_update(state, {{"w", p}});
  return p->value.data[0];
}

}  // namespace

TEST_CASE("sgd first step without momentum") {
  HyperOverrides o;
  o.lr = 0.1;
  o.momentum = 0.0;
  CHECK(step_once(Solver::sgd, 1.0, 0.5, o) == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("adam first step at the default rate") {
  const double w = step_once(Solver::adam, 1.0, 1.0);
  // mhat = 1, uhat = 1 after bias correction on step one
  const double expected = 1.0 - 1e-4 * 1.0 / (std::sqrt(1.0) + 1e-8);
  CHECK(std::abs(w - expected) <= 1e-12);
  CHECK(std::abs((w - 1.0) - (-1e-4)) <= 1e-4 * 1e-6);  // eps-scale slack around -lr
}

TEST_CASE("adagrad first step") {
  HyperOverrides o;
  o.lr = 0.1;
  const double w = step_once(Solver::adagrad, 1.0, 2.0, o);
  const double expected = 1.0 - 0.1 * 2.0 / (std::sqrt(4.0) + 1e-8);
  CHECK(std::abs(w - expected) <= 1e-12);
  CHECK(std::abs(w - 0.9) <= 1e-8);  // step magnitude ~ lr
}

TEST_CASE("adadelta first step") {
  const double w = step_once(Solver::adadelta, 1.0, 1.0);
  const double expected = 1.0 - std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6);
  CHECK(std::abs(w - expected) <= 1e-12);
  CHECK(std::abs((w - 1.0) - (-0.004472)) <= 1e-6);
}

TEST_CASE("rmsprop first step") {
  HyperOverrides o;
  o.lr = 0.1;
  const double w = step_once(Solver::rmsprop, 1.0, 1.0, o);
  const double expected = 1.0 - 0.1 * 1.0 / (std::sqrt(0.1) + 1e-8);
  CHECK(std::abs(w - expected) <= 1e-12);
}

TEST_CASE("nag first step in lookahead form") {
  HyperOverrides o;
  o.lr = 0.1;
  const double w = step_once(Solver::nag, 1.0, 0.5, o);
  // v = -lr*g; stored lookahead moves by (1+mu)*v
  const double expected = 1.0 - (1.0 + 0.9) * 0.1 * 0.5;
  CHECK(std::abs(w - expected) <= 1e-12);
}

TEST_CASE("zero gradient with fresh buffers is a fixed point for every solver") {
  for (Solver s : {Solver::sgd, Solver::adam, Solver::adagrad, Solver::nag, Solver::rmsprop,
                   Solver::adadelta})
    CHECK(step_once(s, 0.7, 0.0) == 0.7);
}

TEST_CASE("every solver monotonically shrinks |w| on the quadratic") {
  for (Solver s : {Solver::sgd, Solver::adam, Solver::adagrad, Solver::nag, Solver::rmsprop,
                   Solver::adadelta}) {
    CAPTURE(optim::solver_name(s));
    auto state = optim::make_state(s);
    auto p = scalar_param(1.0, 0.0);
    double prev = 1.0;
    for (int step = 0; step < 100; ++step) {
      p->grad.data[0] = p->value.data[0];  // d/dw of w^2/2
      optim::apply_update(state, {{"w", p}});
      const double w = p->value.data[0];
      CHECK(std::abs(w) < std::abs(prev));
      prev = w;
    }
    CHECK(state.step == 100);
  }
}

TEST_CASE("adam early steps are bounded by a small multiple of the rate") {
  auto state = optim::make_state(Solver::adam);
  auto p = scalar_param(0.5, 0.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> g(-1.0, 1.0);
  for (int step = 0; step < 10; ++step) {
    const double before = p->value.data[0];
    p->grad.data[0] = g(rng);
    optim::apply_update(state, {{"w", p}});
    CHECK(std::abs(p->value.data[0] - before) <= 3.0 * 1e-4);
  }
}

TEST_CASE("state round-trip reproduces bit-identical updates") {
  for (Solver s : {Solver::sgd, Solver::adam, Solver::adagrad, Solver::nag, Solver::rmsprop,
                   Solver::adadelta}) {
    auto state = optim::make_state(s, [] {
      HyperOverrides o;
      o.lr = 0.05;
      return o;
    }());
    auto p = scalar_param(1.0, 0.0);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> g(-1.0, 1.0);
    for (int i = 0; i < 7; ++i) {
      p->grad.data[0] = g(rng);
      optim::apply_update(state, {{"w", p}});
    }

    std::ostringstream os(std::ios::binary);
    optim::save_state(os, state);
    std::istringstream is(os.str(), std::ios::binary);
    auto restored = optim::load_state(is);
    CHECK(restored.step == state.step);

    auto pa = scalar_param(p->value.data[0], 0.0);
    auto pb = scalar_param(p->value.data[0], 0.0);
    for (int i = 0; i < 7; ++i) {
      const double grad = g(rng);
      pa->grad.data[0] = grad;
      pb->grad.data[0] = grad;
      optim::apply_update(state, {{"w", pa}});
      optim::apply_update(restored, {{"w", pb}});
      CHECK(pa->value.data[0] == pb->value.data[0]);
    }
  }
}

TEST_CASE("accumulator buffers stay non-negative") {
  auto state = optim::make_state(Solver::adagrad);
  auto p = scalar_param(1.0, 0.0);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> g(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    p->grad.data[0] = g(rng);
    optim::apply_update(state, {{"w", p}});
    CHECK(state.buf_a[0].data[0] >= 0.0);
  }
}

TEST_CASE("NaN gradients abort naming the parameter") {
  auto state = optim::make_state(Solver::sgd);
  auto p = scalar_param(1.0, std::nan(""), "conv3.w");
  CHECK_THROWS_WITH_AS(optim::apply_update(state, {{"conv3.w", p}}),
                       doctest::Contains("conv3.w"), std::runtime_error);
}

TEST_CASE("make_state defaults, overrides and validation") {
  auto adam = optim::make_state(Solver::adam);
  CHECK(adam.hyper.lr == 1e-4);
  CHECK(adam.hyper.beta1 == 0.9);
  CHECK(adam.hyper.beta2 == 0.999);
  CHECK(adam.hyper.eps == 1e-8);

  auto ad = optim::make_state(Solver::adadelta);
  CHECK(ad.hyper.rho == 0.95);
  CHECK(ad.hyper.eps == 1e-6);

  HyperOverrides o;
  o.lr = 0.5;
  auto sgd = optim::make_state(Solver::sgd, o);
  CHECK(sgd.hyper.lr == 0.5);
  CHECK(sgd.hyper.momentum == 0.9);

  CHECK_THROWS_AS(optim::parse_solver("foo"), std::invalid_argument);
  o.lr = -1.0;
  CHECK_THROWS_AS(optim::make_state(Solver::sgd, o), std::invalid_argument);
  HyperOverrides bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(optim::make_state(Solver::adam, bad), std::invalid_argument);
}

TEST_SUITE_END();
