#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "gbml/tasks.hpp"

using namespace gbml;
using namespace gbml::tasks;

TEST_CASE("sinusoid ranges") {
  const auto in = sinusoid_in_distribution();
  CHECK(in.amplitude.lo == 0.1);
  CHECK(in.amplitude.hi == 5.0);
  CHECK(in.phase.lo == 0.0);
  CHECK(in.phase.hi == std::numbers::pi);
  CHECK(in.k_shot == 5);

  const auto ood = sinusoid_out_of_distribution();
  CHECK(ood.amplitude.lo == 5.0);
  CHECK(ood.amplitude.hi == 10.0);
  CHECK(ood.phase.lo == std::numbers::pi);
  CHECK(ood.phase.hi == 2 * std::numbers::pi);
}

TEST_CASE("sinusoid values") {
  CHECK(sinusoid_value(1.0, 0.0, 0.0) == 0.0);
  CHECK(sinusoid_value(2.0, std::numbers::pi / 2, 0.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(evaluate(Family::Sinusoid, {3.0, 0.5}, 1.0) == sinusoid_value(3.0, 0.5, 1.0));
  CHECK_THROWS_AS(evaluate(Family::Sinusoid, {1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("polynomial values") {
  CHECK(polynomial_value({1, 0, 0, 0}, 2.0) == 8.0);
  CHECK(polynomial_value({0, 0, 0, 0}, 1.7) == 0.0);
  CHECK(polynomial_value({1, -2, 3, -4}, 2.0) == 8 - 8 + 6 - 4);
  CHECK_THROWS_AS(polynomial_value({1, 2, 3}, 0.0), std::invalid_argument);
}

TEST_CASE("sampled sinusoid tasks are exact and in range") {
  Rng rng(0);
  auto ranges = sinusoid_in_distribution();
  ranges.query_size = 20;
  for (int i = 0; i < 200; ++i) {
    const auto t = sample_sinusoid(rng, ranges);
    CHECK(t.family == Family::Sinusoid);
    REQUIRE(t.descriptor.size() == 2);
    CHECK(ranges.amplitude.contains(t.descriptor[0]));
    CHECK(ranges.phase.contains(t.descriptor[1]));
    CHECK(t.support_x.size() == 5);
    CHECK(t.query_x.size() == 20);
    for (std::size_t k = 0; k < t.support_x.size(); ++k) {
      CHECK(ranges.input.contains(t.support_x[k]));
      CHECK(t.support_y[k] == sinusoid_value(t.descriptor[0], t.descriptor[1], t.support_x[k]));
    }
    for (std::size_t k = 0; k < t.query_x.size(); ++k) {
      CHECK(t.query_y[k] == evaluate(t.family, t.descriptor, t.query_x[k]));
    }
  }
  CHECK(sample_sinusoid(rng, ranges).support_inputs().shape() == ad::Shape{5, 1});
}

TEST_CASE("sampled polynomial tasks") {
  Rng rng(1);
  PolynomialRanges ranges;
  for (int i = 0; i < 50; ++i) {
    const auto t = sample_polynomial(rng, ranges);
    REQUIRE(t.descriptor.size() == 4);
    for (double c : t.descriptor) CHECK(ranges.coefficient.contains(c));
    CHECK(t.support_x.size() == 40);
    CHECK(std::set<double>(t.support_x.begin(), t.support_x.end()).size() == t.support_x.size());
    for (std::size_t k = 0; k < t.support_x.size(); ++k) {
      CHECK(ranges.input.contains(t.support_x[k]));
      CHECK(t.support_y[k] == polynomial_value(t.descriptor, t.support_x[k]));
    }
  }

  SUBCASE("collisions are resampled") {
    // A degenerate input interval cannot supply two distinct points; a
    // near-degenerate one must still yield distinct ones.
    PolynomialRanges narrow;
    narrow.input = {1.0, std::nextafter(1.0, 2.0)};
    narrow.k_shot = 2;
    const auto t = sample_polynomial(rng, narrow);
    CHECK(t.support_x[0] != t.support_x[1]);
  }

  SUBCASE("all-zero coefficients") {
    PolynomialRanges zero;
    zero.coefficient = {0.0, 0.0};
    const auto t = sample_polynomial(rng, zero);
    for (double y : t.query_y) CHECK(y == 0.0);
  }

  SUBCASE("empty support") {
    PolynomialRanges none;
    none.k_shot = 0;
    CHECK_THROWS_AS(sample_polynomial(rng, none), std::invalid_argument);
  }
}

TEST_CASE("task streams are seed-determined") {
  auto stream = [](std::uint64_t seed) {
    Rng rng(seed, 1);
    std::ostringstream os;
    for (std::size_t i = 0; i < 5; ++i) write_task_record(os, sample_sinusoid(rng, sinusoid_in_distribution()), i);
    return os.str();
  };
  CHECK(stream(3) == stream(3));
  CHECK(stream(3) != stream(4));
}

TEST_CASE("range validation") {
  Rng rng(2);
  TaskRanges inverted;
  inverted.amplitude = {2.0, 1.0};
  CHECK_THROWS_AS(sample_sinusoid(rng, inverted), std::invalid_argument);
  TaskRanges no_support;
  no_support.k_shot = 0;
  CHECK_THROWS_AS(sample_sinusoid(rng, no_support), std::invalid_argument);
}

TEST_CASE("ood_sweep") {
  SUBCASE("amplitude axis") {
    const auto r = ood_sweep(Family::Sinusoid, SweepAxis::Amplitude, {5, 6, 8, 10});
    REQUIRE(r.size() == 4);
    const double his[] = {5, 6, 8, 10};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(r[i].amplitude.hi == his[i]);
      CHECK(r[i].amplitude.lo == 0.1);
      CHECK(r[i].phase.hi == std::numbers::pi);
    }
  }
  SUBCASE("single in-distribution point") {
    const auto r = ood_sweep(Family::Sinusoid, SweepAxis::Amplitude, {5.0});
    REQUIRE(r.size() == 1);
    const auto in = sinusoid_in_distribution();
    CHECK(r[0].amplitude.lo == in.amplitude.lo);
    CHECK(r[0].amplitude.hi == in.amplitude.hi);
    CHECK(r[0].phase.hi == in.phase.hi);
    CHECK(r[0].input.hi == in.input.hi);
  }
  SUBCASE("phase axis reaches the extrapolated bound") {
    const auto r = ood_sweep(Family::Sinusoid, SweepAxis::Phase,
                             {std::numbers::pi, 1.5 * std::numbers::pi, 2 * std::numbers::pi});
    CHECK(r.back().phase.hi == sinusoid_out_of_distribution().phase.hi);
  }
  SUBCASE("scale axis") {
    const auto r = ood_sweep(Family::Sinusoid, SweepAxis::Scale, {1, 2});
    CHECK(r[1].input.lo == -10.0);
    CHECK(r[1].input.hi == 10.0);
    CHECK_THROWS_AS(ood_sweep(Family::Sinusoid, SweepAxis::Scale, {0.0}), std::invalid_argument);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(ood_sweep(Family::Sinusoid, SweepAxis::Amplitude, {}), std::invalid_argument);
    CHECK_THROWS_AS(ood_sweep(Family::Sinusoid, SweepAxis::Amplitude, {6, 5}), std::invalid_argument);
    CHECK_THROWS_AS(ood_sweep(Family::Polynomial, SweepAxis::Amplitude, {5}), std::invalid_argument);
    CHECK_THROWS_AS(ood_sweep(Family::Sinusoid, SweepAxis::Amplitude, {0.05}), std::invalid_argument);
  }
}

TEST_CASE("names") {
  CHECK(family_from_string("polynomial") == Family::Polynomial);
  CHECK(to_string(Family::Sinusoid) == "sinusoid");
  CHECK(sweep_axis_from_string("phase") == SweepAxis::Phase);
  CHECK_THROWS_AS(family_from_string("omniglot"), std::invalid_argument);
  CHECK_THROWS_AS(sweep_axis_from_string("frequency"), std::invalid_argument);
}

TEST_CASE("task record layout") {
  Task t;
  t.family = Family::Polynomial;
  t.descriptor = {1, 0, 0, 0};
  t.support_x = {2};
  t.support_y = {8};
  t.query_x = {1, -1};
  t.query_y = {1, -1};
  std::ostringstream os;
  write_task_record(os, t, 3);
  CHECK(os.str() ==
        "task 3\nfamily polynomial\ndescriptor 1 0 0 0\nsupport 1 2 8\nquery 2 1 1 -1 -1\nend\n");
}
