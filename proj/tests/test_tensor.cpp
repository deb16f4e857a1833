#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "xview/error.hpp"
#include "xview/tensor.hpp"

using namespace xview;

TEST_CASE("matmul identity and hand arithmetic") {
  Graph g;
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor m({3, 3}, {2, -1, 4, 0, 3, 5, 7, 1, -2});
  Tensor out = g.matmul(eye, m);
  for (std::size_t i = 0; i < 9; ++i) CHECK(out.at(i) == doctest::Approx(m.at(i)));

  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 1}, {1, 1});
  Tensor c = g.matmul(a, b);
  CHECK(c.at(0, 0) == doctest::Approx(3));
  CHECK(c.at(1, 0) == doctest::Approx(7));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Graph g;
  Tensor a({2, 3}, std::vector<double>(6, 1.0));
  Tensor b({2, 2}, std::vector<double>(4, 1.0));
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
  try {
    g.matmul(a, b);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("gradient of sum(A*B) w.r.t. A equals ones x B^T") {
  Rng rng(7);
  Graph g;
  Tensor a = g.leaf({2, 3}, rng.normal_vec(6));
  Tensor b({3, 4}, rng.normal_vec(12));
  g.backward(g.sum(g.matmul(a, b)));
  const std::vector<double>& ga = g.grad(a);
  // d/dA_ik sum(AB) = sum_j B_kj.
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      double expect = 0.0;
      for (std::size_t j = 0; j < 4; ++j) expect += b.at(k, j);
      CHECK(ga[i * 3 + k] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("elementwise examples") {
  Graph g;
  Tensor x({3}, {-1, 0, 2});
  Tensor r = g.relu(x);
  CHECK(r.at(0) == 0.0);
  CHECK(r.at(1) == 0.0);
  CHECK(r.at(2) == 2.0);

  CHECK(g.sigmoid(Tensor::scalar(0.0)).value() == doctest::Approx(0.5));

  Tensor t0 = g.leaf({1}, {0.0});
  g.backward(g.tanh(t0));
  CHECK(g.grad(t0)[0] == doctest::Approx(1.0));  // d tanh/dx at 0
}

TEST_CASE("elementwise domain and shape errors") {
  Graph g;
  CHECK_THROWS_AS(g.log(Tensor({2}, {1.0, 0.0})), ValueError);
  CHECK_THROWS_AS(g.log(Tensor({1}, {-2.0})), ValueError);
  CHECK_THROWS_AS(g.add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST_CASE("log_softmax values, stability and normalization") {
  Graph g;
  Tensor a = g.log_softmax(Tensor({2}, {0.0, 0.0}));
  CHECK(a.at(0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(a.at(1) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

  Tensor big = g.log_softmax(Tensor({2}, {1000.0, 0.0}));
  CHECK(std::isfinite(big.at(0)));
  CHECK(std::isfinite(big.at(1)));
  CHECK(big.at(0) == doctest::Approx(0.0).epsilon(1e-9));

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v = rng.normal_vec(7);
    for (auto& e : v) e *= 5.0;
    Tensor ls = g.log_softmax(Tensor({7}, v));
    double total = 0.0;
    for (std::size_t i = 0; i < 7; ++i) total += std::exp(ls.at(i));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    // Shift invariance: log_softmax(v + c) = log_softmax(v) within 1e-12.
    const double c = rng.uniform(-40.0, 40.0);
    std::vector<double> shifted = v;
    for (auto& e : shifted) e += c;
    Tensor ls2 = g.log_softmax(Tensor({7}, shifted));
    for (std::size_t i = 0; i < 7; ++i) CHECK(std::abs(ls2.at(i) - ls.at(i)) < 1e-12);
  }
}

TEST_CASE("backward basics") {
  Graph g;
  Tensor x = g.leaf({4}, {1.0, -2.0, 0.5, 3.0});
  g.backward(g.sum(g.mul(x, x)));
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(g.grad(x)[i] == doctest::Approx(2.0 * x.at(i)));  // d sum(x*x)/dx = 2x

  // Constant loss: every recorded gradient is zero.
  g.backward(Tensor::scalar(5.0));
  for (std::size_t i = 0; i < 4; ++i) CHECK(g.grad(x)[i] == 0.0);

  // Non-scalar loss violates the contract.
  Graph g2;
  Tensor y = g2.leaf({2}, {1.0, 2.0});
  CHECK_THROWS_AS(g2.backward(y), ContractError);
}

TEST_CASE("composite gradients match finite differences") {
  Rng rng(11);
  ParamStore store;
  auto w = store.create("w", {3, 3}, rng.normal_vec(9));
  auto b = store.create("b", {3}, rng.normal_vec(3));
  Tensor x({2, 3}, rng.normal_vec(6));

  auto loss_fn = [&](Graph& g) {
    Tensor h = g.add_rowwise(g.matmul(x, enter(g, w)), enter(g, b));
    Tensor act = g.add(g.tanh(h), g.mul(g.sigmoid(h), g.relu(h)));
    Tensor sq = g.square(g.sub(act, g.exp(g.scale(h, 0.1))));
    Tensor ls = g.log_softmax(sq);
    return g.mean_all(g.add(sq, g.mul(ls, ls)));
  };
  auto check = testing::check_gradients(loss_fn, store.all());
  CHECK(check.checked == 12);
  CHECK(check.max_rel_err < 1e-4);
}

TEST_CASE("slicing and concatenation gradients") {
  Rng rng(13);
  ParamStore store;
  auto w = store.create("w", {4, 6}, rng.normal_vec(24));
  auto loss_fn = [&](Graph& g) {
    Tensor t = enter(g, w);
    Tensor left = g.slice_cols(t, 0, 2);
    Tensor right = g.slice_cols(t, 2, 4);
    Tensor top = g.rows(t, 0, 2);
    Tensor bottom = g.rows(t, 2, 2);
    Tensor cat = g.concat_cols(g.concat_rows(std::vector<Tensor>{top, bottom}), t);
    return g.add(g.sum(g.square(cat)), g.mul(g.sum(left), g.sum(right)));
  };
  auto check = testing::check_gradients(loss_fn, store.all());
  CHECK(check.max_rel_err < 1e-4);
}

TEST_CASE("dropout modes and survival rate") {
  Graph g;
  Rng rng(5);
  Tensor x = Tensor::full({100}, 1.0);
  // Rate 0 and evaluation mode are identities.
  Tensor id0 = g.dropout(x, 0.0, rng.child("a"), true);
  Tensor id1 = g.dropout(x, 0.7, rng.child("b"), false);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(id0.at(i) == 1.0);
    CHECK(id1.at(i) == 1.0);
  }

  CHECK_THROWS_AS(g.dropout(x, 1.0, rng, true), ValueError);
  CHECK_THROWS_AS(g.dropout(x, -0.1, rng, true), ValueError);

  const std::size_t n = 100000;
  Tensor big = Tensor::full({n}, 1.0);
  Tensor dropped = g.dropout(big, 0.5, rng.child("c"), true);
  std::size_t survivors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dropped.at(i) != 0.0) {
      ++survivors;
      CHECK(dropped.at(i) == doctest::Approx(2.0));  // scaled by 1/(1-rate)
    }
  }
  const double fraction = static_cast<double>(survivors) / static_cast<double>(n);
  CHECK(fraction == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("forward evaluation is deterministic under a fixed seed") {
  auto run = [] {
    Graph g;
    Rng rng(99);
    Tensor x({4, 4}, rng.normal_vec(16));
    Tensor d = g.dropout(g.tanh(x), 0.3, rng.child("drop"), true);
    return g.sum(d).value();
  };
  CHECK(run() == run());
}

TEST_CASE("keyed leaves deduplicate and accumulate shared gradients") {
  ParamStore store;
  Rng rng(1);
  auto p = store.create("p", {2}, {1.0, 2.0});
  Graph g;
  Tensor t1 = enter(g, p);
  Tensor t2 = enter(g, p);
  CHECK(t1.node() == t2.node());
  g.backward(g.sum(g.add(t1, t2)));
  CHECK(g.grad(t1)[0] == doctest::Approx(2.0));  // both uses accumulate once
}
