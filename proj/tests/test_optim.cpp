#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "xview/error.hpp"
#include "xview/optim.hpp"

using namespace xview;

TEST_CASE("first adam step matches the hand-computed value") {
  OptimizerConfig cfg;  // adam, lr 1e-3, betas 0.9/0.999, eps 1e-8
  std::vector<double> value = {1.0};
  AdamState state{{0.0}, {0.0}};
  adam_step(value, {1.0}, state, 1, cfg);
  // m_hat = 1, v_hat = 1: delta = -lr / (1 + eps) = -0.000999999990.
  const double expected = 1.0 - 0.001 * (1.0 / (1.0 + 1e-8));
  CHECK(value[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(value[0] == doctest::Approx(1.0 - 0.000999999990).epsilon(1e-12));
}

TEST_CASE("zero gradient from a fresh state leaves parameters unchanged") {
  OptimizerConfig cfg;
  std::vector<double> value = {2.0, -3.0};
  AdamState state{{0.0, 0.0}, {0.0, 0.0}};
  for (long t = 1; t <= 5; ++t) adam_step(value, {0.0, 0.0}, state, t, cfg);
  CHECK(value[0] == 2.0);
  CHECK(value[1] == -3.0);
  CHECK(state.m[0] == 0.0);
  CHECK(state.v[0] == 0.0);
}

TEST_CASE("sgd step is exactly value minus lr times grad") {
  std::vector<double> value = {1.0, 2.0, 3.0};
  sgd_step(value, {0.5, -1.0, 0.0}, 0.1);
  CHECK(value[0] == doctest::Approx(1.0 - 0.05).epsilon(1e-15));
  CHECK(value[1] == doctest::Approx(2.0 + 0.1).epsilon(1e-15));
  CHECK(value[2] == 3.0);
}

TEST_CASE("optimizer pulls gradients by key and treats absent keys as zero") {
  ParamStore store;
  auto used = store.create("used", {2}, {1.0, 1.0});
  auto unused = store.create("unused", {2}, {5.0, 5.0});
  Optimizer opt(OptimizerConfig{OptKind::sgd, 0.5, 0.9, 0.999, 1e-8}, store.all());

  Graph g;
  Tensor t = enter(g, used);
  g.backward(g.sum(g.square(t)));
  opt.step(g);
  CHECK(used->value[0] == doctest::Approx(1.0 - 0.5 * 2.0));
  CHECK(unused->value[0] == 5.0);
  CHECK(opt.steps_taken() == 1);
}

TEST_CASE("optimizer config validation") {
  OptimizerConfig bad;
  bad.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.lr = 0.0;
  CHECK_NOTHROW(bad.validate());  // lr = 0 expresses a frozen run
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  ParamStore store;
  auto p = store.create("p", {1}, {4.0});
  OptimizerConfig ocfg;
  ocfg.lr = 0.01;
  Optimizer opt(ocfg, store.all());
  for (int i = 0; i < 2000; ++i) {
    Graph g;
    Tensor t = enter(g, p);
    g.backward(g.sum(g.square(g.add_const(t, -1.5))));
    opt.step(g);
  }
  CHECK(p->value[0] == doctest::Approx(1.5).epsilon(1e-2));
}
