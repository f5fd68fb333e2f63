#include <cmath>

#include "doctest.h"
#include "gbml/optim.hpp"
#include "gbml/rng.hpp"

using namespace gbml;
using ad::Tensor;
using optim::ParamList;

namespace {

ParamList random_params(Rng& rng) {
  std::vector<double> a(6);
  std::vector<double> b(3);
  for (auto& v : a) v = rng.uniform(-2, 2);
  for (auto& v : b) v = rng.uniform(-2, 2);
  return {Tensor::matrix(2, 3, a), Tensor::vector(b)};
}

}  // namespace

TEST_CASE("sgd_step") {
  const ParamList p{Tensor::vector({1, 1})};
  const auto out = optim::sgd_step(p, {Tensor::vector({2, -2})}, 0.5);
  CHECK(out[0][0] == 0.0);
  CHECK(out[0][1] == 2.0);

  const auto same = optim::sgd_step(p, {Tensor::vector({0, 0})}, 0.5);
  CHECK(ad::max_abs_diff(same[0], p[0]) == 0.0);

  SUBCASE("five small steps accumulate linearly") {
    const ParamList g{Tensor::vector({0.3, -1.2})};
    ParamList q = p;
    for (int i = 0; i < 5; ++i) q = optim::sgd_step(q, g, 0.001);
    CHECK(q[0][0] == doctest::Approx(1 - 0.005 * 0.3).epsilon(1e-14));
    CHECK(q[0][1] == doctest::Approx(1 + 0.005 * 1.2).epsilon(1e-14));
  }

  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(optim::sgd_step(p, {Tensor::vector({1, 2, 3})}, 0.1), ad::ShapeError);
    CHECK_THROWS_AS(optim::sgd_step(p, {}, 0.1), ad::ShapeError);
  }

  SUBCASE("negative learning rate") {
    CHECK_THROWS_AS(optim::sgd_step(p, p, -0.1), std::invalid_argument);
  }
}

TEST_CASE("sgd_step is linear in the gradient and the learning rate") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_params(rng);
    const auto g1 = random_params(rng);
    const auto g2 = random_params(rng);
    const double lr = rng.uniform(0.01, 1.0);
    ParamList sum{g1[0] + g2[0], g1[1] + g2[1]};
    const auto both = optim::sgd_step(p, sum, lr);
    const auto first = optim::sgd_step(p, g1, lr);
    const auto second = optim::sgd_step(p, g2, lr);
    const auto doubled = optim::sgd_step(p, g1, 2 * lr);
    for (std::size_t i = 0; i < p.size(); ++i) {
      // p - lr (g1 + g2) == (p - lr g1) + (p - lr g2) - p
      CHECK(ad::max_abs_diff(both[i], first[i] + second[i] - p[i]) < 1e-12);
      CHECK(ad::max_abs_diff(doubled[i] - p[i], 2.0 * (first[i] - p[i])) < 1e-12);
    }
  }
}

TEST_CASE("adam first step moves each coordinate by the learning rate") {
  const ParamList p{Tensor::vector({0.5, -0.5, 2.0})};
  const ParamList g{Tensor::vector({3.0, -0.01, 1e-3})};
  const auto state = optim::AdamState::init(p);
  CHECK(state.hyper.lr == 1e-3);
  CHECK(state.hyper.beta1 == 0.9);
  CHECK(state.hyper.beta2 == 0.999);
  CHECK(state.hyper.eps == 1e-8);
  const auto r = optim::adam_step(state, p, g);
  for (std::size_t i = 0; i < 3; ++i) {
    const double moved = r.params[0][i] - p[0][i];
    CHECK(std::abs(moved + 1e-3 * (g[0][i] > 0 ? 1 : -1)) < 1e-6);
  }
  CHECK(r.state.step == 1);
  CHECK(state.step == 0);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  const ParamList p{Tensor::vector({1, 2}), Tensor::matrix(1, 1, {3})};
  auto state = optim::AdamState::init(p);
  ParamList cur = p;
  for (std::size_t k = 1; k <= 3; ++k) {
    auto r = optim::adam_step(state, cur, {Tensor::zeros({2}), Tensor::zeros({1, 1})});
    CHECK(r.state.step == k);
    state = std::move(r.state);
    cur = std::move(r.params);
  }
  CHECK(ad::max_abs_diff(cur[0], p[0]) == 0.0);
  CHECK(ad::max_abs_diff(cur[1], p[1]) == 0.0);
}

TEST_CASE("adam minimizes a scalar quadratic") {
  // Independent scalar recurrence for the same update.
  double m = 0, v = 0, ref = 5.0;
  ParamList p{Tensor::scalar(5.0)};
  auto state = optim::AdamState::init(p, {.lr = 0.1});
  for (int t = 1; t <= 100; ++t) {
    const double g = 2 * ref;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    ref -= 0.1 * mh / (std::sqrt(vh) + 1e-8);

    auto r = optim::adam_step(state, p, {Tensor::scalar(2.0 * p[0].item())});
    state = std::move(r.state);
    p = std::move(r.params);
  }
  CHECK(std::abs(p[0].item()) < 0.5);
  CHECK(p[0].item() == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("adam step one is insensitive to gradient scale") {
  Rng rng(9);
  const auto p = random_params(rng);
  const auto g = random_params(rng);
  const ParamList big{1000.0 * g[0], 1000.0 * g[1]};
  const auto state = optim::AdamState::init(p);
  const auto a = optim::adam_step(state, p, g);
  const auto b = optim::adam_step(state, p, big);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(ad::relative_error(a.params[i] - p[i], b.params[i] - p[i]) < 1e-5);
  }
}

TEST_CASE("adam shape errors") {
  const ParamList p{Tensor::vector({1, 2})};
  const auto state = optim::AdamState::init(p);
  CHECK_THROWS_AS(optim::adam_step(state, p, {Tensor::vector({1, 2, 3})}), ad::ShapeError);
  CHECK_THROWS_AS(optim::adam_step(state, {Tensor::vector({1, 2, 3})}, {Tensor::vector({1, 2, 3})}),
                  ad::ShapeError);
  CHECK_THROWS_AS(optim::adam_step(state, {p[0], p[0]}, {p[0], p[0]}), ad::ShapeError);
}

TEST_CASE("updates are deterministic") {
  Rng r1(21), r2(21);
  const auto p1 = random_params(r1);
  const auto g1 = random_params(r1);
  const auto p2 = random_params(r2);
  const auto g2 = random_params(r2);
  const auto a = optim::adam_step(optim::AdamState::init(p1), p1, g1);
  const auto b = optim::adam_step(optim::AdamState::init(p2), p2, g2);
  for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(ad::max_abs_diff(a.params[i], b.params[i]) == 0.0);
  CHECK(a.state.m == b.state.m);
  CHECK(a.state.v == b.state.v);
}
