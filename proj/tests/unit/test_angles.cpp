#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ellipsedet/angles.hpp"
#include "ellipsedet/errors.hpp"

using namespace ellipsedet;

TEST_SUITE("angles") {
  TEST_CASE("fold_angle keeps in-range values") {
    CHECK(fold_angle(kPi / 3.0) == kPi / 3.0);
    CHECK(fold_angle(kHalfPi) == kHalfPi);
    CHECK(fold_angle(0.0) == 0.0);
  }

  TEST_CASE("fold_angle maps the obtuse branch") {
    CHECK(fold_angle(2.0 * kPi / 3.0) == doctest::Approx(-kPi / 3.0).epsilon(1e-15));
    CHECK(fold_angle(kPi) == doctest::Approx(0.0).epsilon(1e-15));
  }

  TEST_CASE("fold_angle sends -pi/2 to the closed end") {
    CHECK(fold_angle(-kHalfPi) == kHalfPi);
    CHECK(fold_angle(3.0 * kHalfPi) == doctest::Approx(kHalfPi).epsilon(1e-15));
  }

  TEST_CASE("fold_angle range, idempotence and mod-pi consistency") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-50.0, 50.0);
    for (int i = 0; i < 20000; ++i) {
      const double x = dist(rng);
      const double f = fold_angle(x);
      REQUIRE(f > -kHalfPi);
      REQUIRE(f <= kHalfPi);
      REQUIRE(fold_angle(f) == f);
      const double k = (x - f) / kPi;
      REQUIRE(std::abs(k - std::round(k)) < 1e-12 * std::max(1.0, std::abs(x)));
    }
  }

  TEST_CASE("fold_angle rejects non-finite input") {
    CHECK_THROWS_AS(fold_angle(std::numeric_limits<double>::quiet_NaN()), InvalidArgument);
    CHECK_THROWS_AS(fold_angle(std::numeric_limits<double>::infinity()), InvalidArgument);
  }

  TEST_CASE("angle_delta examples") {
    const double eps = 1e-6;
    CHECK(angle_delta(0.5, -0.5 + eps) == doctest::Approx(eps).epsilon(1e-9));
    CHECK(angle_delta(0.25, 0.25) == 0.0);
    CHECK(angle_delta(0.4, -0.4) == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("angle_delta is symmetric and bounded") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (int i = 0; i < 10000; ++i) {
      const double a = dist(rng);
      const double b = dist(rng);
      const double d = angle_delta(a, b);
      REQUIRE(d == angle_delta(b, a));
      REQUIRE(d >= 0.0);
      REQUIRE(d <= 0.5);
      const double plain = std::abs(a - b);
      REQUIRE(d == doctest::Approx(std::min(plain, 1.0 - plain)).epsilon(1e-12));
    }
  }

  TEST_CASE("wrapped_difference agrees with angle_delta in magnitude") {
    CHECK(wrapped_difference(0.5, -0.5 + 1e-6) == doctest::Approx(-1e-6).epsilon(1e-6));
    CHECK(std::abs(wrapped_difference(0.4, -0.4)) == doctest::Approx(0.2));
  }
}
