#include <cmath>
#include <vector>

#include "doctest.h"
#include "gbml/models.hpp"
#include "gbml/rng.hpp"
#include "gbml/tensor.hpp"

using namespace gbml;
using ad::Tape;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::element_count(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

void check_values(const Tensor& t, const std::vector<double>& expected, double tol = 0.0) {
  REQUIRE(t.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(t[i] - expected[i]) <= tol);
}

// Small two-layer network written out directly: sum(W2 relu(W1 x + b1)).
double two_layer(const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& x) {
  const std::size_t hidden = w1.rows();
  const std::size_t in = w1.cols();
  double out = 0.0;
  for (std::size_t h = 0; h < hidden; ++h) {
    double pre = b1[h];
    for (std::size_t i = 0; i < in; ++i) pre += w1.at(h, i) * x[i];
    out += w2[h] * std::max(0.0, pre);
  }
  return out;
}

}  // namespace

TEST_CASE("elementwise arithmetic") {
  const auto a = Tensor::vector({1, 2});
  const auto b = Tensor::vector({3, 4});
  check_values(a + b, {4, 6});
  check_values(a - b, {-2, -2});
  check_values(a * b, {3, 8});
  check_values(-a, {-1, -2});
  check_values(2.5 * a, {2.5, 5});
  check_values(a + Tensor::scalar(10), {11, 12});
  check_values(Tensor::scalar(10) - a, {9, 8});
}

TEST_CASE("shape mismatch names both shapes") {
  const auto a = Tensor::vector({1, 2});
  const auto b = Tensor::vector({1, 2, 3});
  try {
    (void)(a + b);
    FAIL("expected ShapeError");
  } catch (const ad::ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2]") != std::string::npos);
    CHECK(msg.find("[3]") != std::string::npos);
  }
  CHECK_THROWS_AS((void)(Tensor::matrix(2, 1, {1, 2}) * Tensor::vector({1, 2})), ad::ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), ad::ShapeError);
}

TEST_CASE("x - x is zero and so is its gradient") {
  Tape tape;
  const auto x = tape.variable(Tensor::vector({0.3, -1.7, 4.0}));
  const auto d = x - x;
  check_values(d, {0, 0, 0});
  check_values(ad::backward(ad::sum(d), {x})[0], {0, 0, 0});
}

TEST_CASE("gradient of sum(x*x) is 2x") {
  Tape tape;
  const auto x = tape.variable(Tensor::vector({2, -3}));
  check_values(ad::backward(ad::sum(x * x), {x})[0], {4, -6});
}

TEST_CASE("matmul") {
  Rng rng(1);
  const auto m = random_tensor({3, 3}, rng);
  const auto eye = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(ad::max_abs_diff(ad::matmul(eye, m), m) == 0.0);

  SUBCASE("inner dimension mismatch") {
    CHECK_THROWS_AS(ad::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ad::ShapeError);
    CHECK_NOTHROW(ad::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}), false, true));
  }

  SUBCASE("gradient of sum(A x) is the column sum of A") {
    Tape tape;
    const auto a = random_tensor({4, 3}, rng);
    const auto x = tape.variable(random_tensor({3, 1}, rng));
    const auto g = ad::backward(ad::sum(ad::matmul(a, x)), {x})[0];
    for (std::size_t c = 0; c < 3; ++c) {
      double col = 0.0;
      for (std::size_t r = 0; r < 4; ++r) col += a.at(r, c);
      CHECK(g[c] == doctest::Approx(col).epsilon(1e-14));
    }
  }

  SUBCASE("gradient matches finite differences on a 4x4 case") {
    const auto a0 = random_tensor({4, 4}, rng);
    const auto b = random_tensor({4, 4}, rng);
    const auto w = random_tensor({4, 4}, rng);
    auto f = [&](const Tensor& a) { return ad::sum(ad::matmul(a, b) * w).item(); };
    Tape tape;
    const auto a = tape.variable(a0);
    const auto g = ad::backward(ad::sum(ad::matmul(a, b) * w), {a})[0];
    CHECK(ad::relative_error(g, ad::finite_diff(f, a0, 1e-5)) < 1e-6);
  }

  SUBCASE("transposed operands") {
    const auto a = random_tensor({3, 2}, rng);
    const auto b = random_tensor({3, 4}, rng);
    CHECK(ad::max_abs_diff(ad::matmul(a, b, true, false), ad::matmul(ad::transpose(a), b)) < 1e-15);
  }
}

TEST_CASE("relu") {
  check_values(ad::relu(Tensor::vector({-1, 0, 2})), {0, 0, 2});
  const auto pos = Tensor::vector({0, 0.5, 3});
  CHECK(ad::max_abs_diff(ad::relu(pos), pos) == 0.0);

  Tape tape;
  const auto x = tape.variable(Tensor::vector({-1, 2}));
  check_values(ad::backward(ad::sum(ad::relu(x)), {x})[0], {0, 1});

  const auto z = tape.variable(Tensor::vector({0.0}));
  check_values(ad::backward(ad::sum(ad::relu(z)), {z})[0], {0});
}

TEST_CASE("reductions") {
  CHECK(ad::mean(Tensor::vector({1, 2, 3})).item() == 2.0);
  CHECK(ad::sum(Tensor::zeros({0})).item() == 0.0);
  check_values(ad::sum_axis(Tensor::zeros({0, 3}), 0), {0, 0, 0});
  CHECK_THROWS_AS(ad::mean(Tensor::zeros({0})), ad::ShapeError);

  Tape tape;
  const auto x = tape.variable(Tensor::vector({5, 6, 7, 8}));
  check_values(ad::backward(ad::mean(x), {x})[0], {0.25, 0.25, 0.25, 0.25});

  const auto m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  check_values(ad::sum_axis(m, 0), {5, 7, 9});
  check_values(ad::sum_axis(m, 1), {6, 15});
}

TEST_CASE("shape ops") {
  const auto a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const auto b = Tensor::matrix(2, 1, {5, 6});
  const auto c = ad::concat_cols(a, b);
  CHECK(c.shape() == ad::Shape{2, 3});
  check_values(c, {1, 2, 5, 3, 4, 6});
  check_values(ad::slice_cols(c, 1, 2), {2, 5, 4, 6});
  CHECK_THROWS_AS(ad::slice_cols(c, 2, 2), ad::ShapeError);
  CHECK_THROWS_AS(ad::concat_cols(a, Tensor::zeros({3, 1})), ad::ShapeError);
  check_values(ad::broadcast_axis(Tensor::vector({1, 2}), 0, 2), {1, 2, 1, 2});
  check_values(ad::broadcast_axis(Tensor::vector({1, 2}), 1, 2), {1, 1, 2, 2});
  CHECK_THROWS_AS(ad::reshape(a, {3}), ad::ShapeError);

  Tape tape;
  const auto x = tape.variable(a);
  const auto y = tape.variable(b);
  const auto w = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const auto g = ad::backward(ad::sum(ad::concat_cols(x, y) * w), {x, y});
  check_values(g[0], {1, 2, 4, 5});
  check_values(g[1], {3, 6});
}

TEST_CASE("backward errors") {
  Tape tape;
  const auto x = tape.variable(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(ad::backward(x * x, {x}), ad::ShapeError);
  CHECK_THROWS_AS(ad::backward(Tensor::scalar(1.0), {x}), ad::TapeError);
  CHECK_THROWS_AS(ad::backward(ad::sum(x), {Tensor::vector({1, 2})}), ad::TapeError);

  Tape other;
  const auto y = other.variable(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(ad::backward(ad::sum(x), {y}), ad::TapeError);
  CHECK_THROWS_AS((void)(x + y), ad::TapeError);

  const auto stale = ad::sum(x);
  tape.clear();
  CHECK_THROWS_AS(ad::backward(stale, {x}), ad::TapeError);
}

TEST_CASE("gradient of something independent of the input is zero") {
  Tape tape;
  const auto x = tape.variable(Tensor::vector({1, 2, 3}));
  const auto c = tape.variable(Tensor::vector({4, 5}));
  check_values(ad::backward(ad::sum(c * c), {x})[0], {0, 0, 0});
  const auto k = Tensor::scalar(7.0) + 0.0 * ad::sum(x);
  check_values(ad::backward(k, {x})[0], {0, 0, 0});
}

TEST_CASE("second order through create_graph") {
  Tape tape;
  const auto x = tape.variable(Tensor::scalar(2.0));
  const auto f = x * x * x;
  const auto g = ad::backward(f, {x}, true)[0];
  CHECK(g.item() == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(g.is_taped());
  const auto h = ad::backward(g, {x})[0];
  CHECK(h.item() == doctest::Approx(12.0).epsilon(1e-15));

  const auto g_plain = ad::backward(f, {x}, false)[0];
  CHECK_FALSE(g_plain.is_taped());
}

TEST_CASE("second order of a two-layer network matches differences of the first gradient") {
  Rng rng(7);
  const auto w1 = random_tensor({6, 3}, rng);
  const auto b1 = random_tensor({6}, rng, 0.5, 1.0);
  const auto w2 = random_tensor({6}, rng);
  const auto x0 = random_tensor({3}, rng, 0.1, 1.0);

  // Loss: 0.5 * (net(x) - 1)^2 with the network built on the tape.
  auto taped_loss = [&](const Tensor& x) {
    const auto pre = ad::matmul(w1, ad::reshape(x, {3, 1})) + ad::reshape(b1, {6, 1});
    const auto out = ad::sum(ad::relu(pre) * ad::reshape(w2, {6, 1}));
    const auto r = out - Tensor::scalar(1.0);
    return 0.5 * (r * r);
  };
  auto grad_at = [&](const Tensor& x0v) {
    Tape t;
    const auto x = t.variable(x0v);
    return ad::backward(taped_loss(x), {x})[0].detach();
  };

  Tape tape;
  const auto x = tape.variable(x0);
  const auto g = ad::backward(taped_loss(x), {x}, true)[0];

  // First order against a straight-line reference.
  auto plain = [&](const Tensor& xv) {
    const double r = two_layer(w1, b1, w2, xv) - 1.0;
    return 0.5 * r * r;
  };
  CHECK(ad::relative_error(g.detach(), ad::finite_diff(plain, x0, 1e-5)) < 1e-5);

  // Hessian row i is the gradient of g_i.
  for (std::size_t i = 0; i < 3; ++i) {
    auto gi = [&](const Tensor& xv) { return grad_at(xv)[i]; };
    const auto row = ad::backward(ad::slice_cols(ad::reshape(g, {1, 3}), i, 1), {x})[0];
    CHECK(ad::relative_error(row, ad::finite_diff(gi, x0, 1e-4)) < 1e-3);
  }
}

TEST_CASE("finite_diff") {
  auto sq = [](const Tensor& x) { return ad::sum(x * x).item(); };
  CHECK(ad::finite_diff(sq, Tensor::vector({1.0}), 1e-5)[0] == doctest::Approx(2.0).epsilon(1e-8));
  auto constant = [](const Tensor&) { return 3.0; };
  CHECK(std::abs(ad::finite_diff(constant, Tensor::vector({1, 2}), 1e-5)[0]) < 1e-10);
  CHECK_THROWS_AS(ad::finite_diff(sq, Tensor::vector({1.0}), 0.0), std::invalid_argument);

  // Against backward on a random MLP.
  Rng rng(11);
  const auto params = models::init_mlp({3, 8, 1}, 0, rng);
  const auto x0 = random_tensor({2, 3}, rng);
  auto f = [&](const Tensor& x) { return ad::sum(models::forward(params, x)).item(); };
  Tape tape;
  const auto x = tape.variable(x0);
  const auto g = ad::backward(ad::sum(models::forward(params, x)), {x})[0];
  REQUIRE(models::min_abs_preactivation(params, x0) > 1e-3);
  CHECK(ad::relative_error(g, ad::finite_diff(f, x0, 1e-5)) < 1e-5);
}

TEST_CASE("derivative is linear in the objective") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    const auto x = tape.variable(random_tensor({5}, rng));
    const auto w = random_tensor({5}, rng);
    const auto f = ad::sum(x * x * w);
    const auto g = ad::sum(ad::relu(x) * w + x);
    const double a = rng.uniform(-3, 3);
    const double b = rng.uniform(-3, 3);
    const auto combined = ad::backward(a * f + b * g, {x})[0];
    const auto gf = ad::backward(f, {x})[0];
    const auto gg = ad::backward(g, {x})[0];
    CHECK(ad::max_abs_diff(combined, a * gf + b * gg) < 1e-12);
  }
}

TEST_CASE("taping is deterministic") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    const auto params = models::init_mlp({2, 16, 16, 1}, 0, rng);
    const auto x0 = random_tensor({4, 2}, rng);
    Tape tape;
    const auto x = tape.variable(x0);
    const auto out = ad::sum(models::forward(params, x));
    const auto g = ad::backward(out, {x}, true)[0];
    return std::pair{tape.op_trace(), std::vector<double>(g.data().begin(), g.data().end())};
  };
  const auto a = run(5);
  const auto b = run(5);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("untaped tensors behave as constants") {
  const auto c = Tensor::vector({1, 2});
  CHECK_FALSE(c.is_taped());
  Tape tape;
  const auto x = tape.variable(Tensor::vector({3, 4}));
  const auto y = x * c;
  CHECK(y.is_taped());
  CHECK_FALSE(y.detach().is_taped());
  check_values(ad::backward(ad::sum(y), {x})[0], {1, 2});
}
