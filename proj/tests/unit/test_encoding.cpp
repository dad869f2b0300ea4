#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ellipsedet/encoding.hpp"
#include "ellipsedet/errors.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

using namespace ellipsedet;

TEST_SUITE("encoding") {
  TEST_CASE("square_length examples") {
    CHECK(square_length(Ellipse::make(0, 0, 4, 3, 0)) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(square_length(Ellipse::make(0, 0, 1, 1, 0)) == doctest::Approx(2.828427).epsilon(1e-6));
    CHECK(square_length(Ellipse::make(0, 0, 4, 3, 1.1)) == square_length(Ellipse::make(0, 0, 4, 3, -0.4)));
  }

  TEST_CASE("encode places a single object") {
    const std::vector<Annotation> scene{{kThorax, Ellipse::make(100, 60, 40, 30, 0)}};
    const EncodedTargets t = encode(scene, 256, 192, 4);
    CHECK(t.grid_w() == 64);
    CHECK(t.grid_h() == 48);
    REQUIRE(t.centers.size() == 1);
    CHECK(t.centers[0].x == 25);
    CHECK(t.centers[0].y == 15);
    CHECK(t.offset.at(0, 25, 15) == 0.0);
    CHECK(t.offset.at(1, 25, 15) == 0.0);
    CHECK(t.square_length.at(0, 25, 15) == doctest::Approx(100.0));
    CHECK(t.delta_a.at(0, 25, 15) == doctest::Approx(0.4));
    CHECK(t.delta_b.at(0, 25, 15) == doctest::Approx(0.3));
    CHECK(t.delta_theta.at(0, 25, 15) == 0.0);
    CHECK(t.heatmap.at(kThorax, 25, 15) == 1.0);
    CHECK(t.center_mask.at(0, 25, 15) == 1.0);
  }

  TEST_CASE("encode keeps the sub-cell remainder") {
    const std::vector<Annotation> scene{{kThorax, Ellipse::make(101, 61, 40, 30, 0)}};
    const EncodedTargets t = encode(scene, 256, 192, 4);
    CHECK(t.centers[0].x == 25);
    CHECK(t.centers[0].y == 15);
    CHECK(t.offset.at(0, 25, 15) == 0.25);
    CHECK(t.offset.at(1, 25, 15) == 0.25);
  }

  TEST_CASE("classes do not share heatmap channels") {
    const std::vector<Annotation> one{{kThorax, Ellipse::make(100, 60, 40, 30, 0)}};
    const std::vector<Annotation> two{{kThorax, Ellipse::make(100, 60, 40, 30, 0)},
                                      {kHeart, Ellipse::make(140, 100, 20, 15, 0.5)}};
    const EncodedTargets a = encode(one, 256, 192);
    const EncodedTargets b = encode(two, 256, 192);
    for (int y = 0; y < a.grid_h(); ++y) {
      for (int x = 0; x < a.grid_w(); ++x) {
        REQUIRE(a.heatmap.at(kThorax, x, y) == b.heatmap.at(kThorax, x, y));
        REQUIRE(a.heatmap.at(kHeart, x, y) == 0.0);
      }
    }
  }

  TEST_CASE("encode rejects bad inputs") {
    const std::vector<Annotation> scene{{kThorax, Ellipse::make(100, 60, 40, 30, 0)}};
    CHECK_THROWS_AS(encode(scene, 254, 192, 4), InvalidArgument);
    const std::vector<Annotation> outside{{kThorax, Ellipse::make(300, 60, 40, 30, 0)}};
    CHECK_THROWS_AS(encode(outside, 256, 192, 4), InvalidArgument);
    const std::vector<Annotation> negative{{kThorax, Ellipse::make(-1, 60, 40, 30, 0)}};
    CHECK_THROWS_AS(encode(negative, 256, 192, 4), InvalidArgument);
  }

  TEST_CASE("same-class collision keeps the larger object") {
    const std::vector<Annotation> scene{{kHeart, Ellipse::make(100, 60, 10, 8, 0)},
                                        {kHeart, Ellipse::make(101, 61, 30, 20, 0.2)}};
    const EncodedTargets t = encode(scene, 256, 192);
    REQUIRE(t.centers.size() == 1);
    CHECK(t.centers[0].ellipse.a == 30.0);
    CHECK(t.square_length.at(0, 25, 15) == doctest::Approx(square_length(scene[1].ellipse)));
  }

  TEST_CASE("decode of empty heads is empty") {
    const EncodedTargets zeros = EncodedTargets::zeros(64, 64, 4);
    CHECK(decode(zeros, 5, 0.5).empty());
    CHECK(decode(zeros, 5, 1e-9).empty());
  }

  TEST_CASE("two same-class objects two cells apart are both recovered") {
    const std::vector<Annotation> scene{{kHeart, Ellipse::make(40.5, 40.25, 12, 6, 0.3)},
                                        {kHeart, Ellipse::make(48.75, 40.5, 10, 9, -0.7)}};
    const EncodedTargets t = encode(scene, 96, 96);
    const std::vector<Detection> dets = decode(t, 2, 0.5);
    REQUIRE(dets.size() == 2);
    for (const Annotation& a : scene) {
      const Detection* d = oracle::match(dets, a);
      REQUIRE(d != nullptr);
      CHECK(d->ellipse.cx == doctest::Approx(a.ellipse.cx).epsilon(1e-12));
      CHECK(d->ellipse.a == doctest::Approx(a.ellipse.a).epsilon(1e-12));
      CHECK(d->ellipse.theta == doctest::Approx(a.ellipse.theta).epsilon(1e-12));
    }
  }

  TEST_CASE("round trip over random scenes") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 200; ++trial) {
      const std::vector<Annotation> scene = oracle::random_scene(rng, 256, 192, 1 + trial % 4);
      const EncodedTargets t = encode(scene, 256, 192);
      const auto per_class = static_cast<int>(scene.size());
      const std::vector<Detection> dets = decode(t, per_class, 0.5);
      REQUIRE(dets.size() == scene.size());
      for (const Annotation& a : scene) {
        const Detection* d = oracle::match(dets, a);
        REQUIRE(d != nullptr);
        REQUIRE(std::abs(d->ellipse.cx - a.ellipse.cx) <= 1e-6);
        REQUIRE(std::abs(d->ellipse.cy - a.ellipse.cy) <= 1e-6);
        REQUIRE(std::abs(d->ellipse.a - a.ellipse.a) <= 1e-6);
        REQUIRE(std::abs(d->ellipse.b - a.ellipse.b) <= 1e-6);
        REQUIRE(angle_delta(d->ellipse.theta / kPi, a.ellipse.theta / kPi) <= 1e-6);
        REQUIRE(mask_dice(rasterize_ellipse(d->ellipse, 256, 192),
                          rasterize_ellipse(a.ellipse, 256, 192)) >= 0.999);
      }
    }
  }

  TEST_CASE("target invariants") {
    std::mt19937_64 rng(103);
    for (int trial = 0; trial < 200; ++trial) {
      const std::vector<Annotation> scene = oracle::random_scene(rng, 128, 96, 1 + trial % 3);
      const EncodedTargets t = encode(scene, 128, 96);
      int positives = 0;
      for (int y = 0; y < t.grid_h(); ++y) {
        for (int x = 0; x < t.grid_w(); ++x) {
          for (int c = 0; c < kNumClasses; ++c) {
            const double v = t.heatmap.at(c, x, y);
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
          }
          if (t.center_mask.at(0, x, y) != 1.0) continue;
          ++positives;
          const double da = t.delta_a.at(0, x, y);
          const double db = t.delta_b.at(0, x, y);
          const double dt = t.delta_theta.at(0, x, y);
          REQUIRE(da > 0.0);
          REQUIRE(da <= 0.5);
          REQUIRE(db > 0.0);
          REQUIRE(db <= da);
          REQUIRE(dt > -0.5);
          REQUIRE(dt <= 0.5);
          REQUIRE(t.offset.at(0, x, y) >= 0.0);
          REQUIRE(t.offset.at(0, x, y) < 1.0);
          REQUIRE(t.offset.at(1, x, y) >= 0.0);
          REQUIRE(t.offset.at(1, x, y) < 1.0);
        }
      }
      REQUIRE(positives == static_cast<int>(scene.size()));
      for (const CenterCell& c : t.centers) REQUIRE(t.heatmap.at(c.class_id, c.x, c.y) == 1.0);
    }
  }

  TEST_CASE("heatmap splat spread") {
    CHECK(splat_sigma(10.0, 4) == 1.0);
    CHECK(splat_sigma(240.0, 4) == doctest::Approx(10.0));
    const std::vector<Annotation> scene{{kThorax, Ellipse::make(128, 96, 60, 50, 0)}};
    const EncodedTargets t = encode(scene, 256, 192);
    const double sigma = splat_sigma(square_length(scene[0].ellipse), 4);
    CHECK(t.heatmap.at(kThorax, 33, 24) == doctest::Approx(std::exp(-1.0 / (2 * sigma * sigma))));
    CHECK(t.heatmap.at(kThorax, 32 + static_cast<int>(3 * sigma) + 2, 24) == 0.0);
  }

  TEST_CASE("tied neighbours yield a single peak at the lowest index") {
    EncodedTargets h = EncodedTargets::zeros(32, 32, 4);
    h.heatmap.at(0, 3, 3) = 0.8;
    h.heatmap.at(0, 4, 3) = 0.8;
    h.square_length.at(0, 3, 3) = 10.0;
    h.delta_a.at(0, 3, 3) = 0.4;
    h.delta_b.at(0, 3, 3) = 0.3;
    h.square_length.at(0, 4, 3) = 10.0;
    h.delta_a.at(0, 4, 3) = 0.4;
    h.delta_b.at(0, 4, 3) = 0.3;
    const std::vector<Detection> dets = decode(h, 5, 0.5);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].ellipse.cx == doctest::Approx(12.0));
    CHECK(dets[0].score == 0.8);
  }

  TEST_CASE("decode canonicalises swapped axes and wraps the angle") {
    EncodedTargets h = EncodedTargets::zeros(32, 32, 4);
    h.heatmap.at(1, 2, 2) = 0.9;
    h.square_length.at(0, 2, 2) = 20.0;
    h.delta_a.at(0, 2, 2) = 0.2;
    h.delta_b.at(0, 2, 2) = 0.4;
    h.delta_theta.at(0, 2, 2) = 0.7;
    const std::vector<Detection> dets = decode(h, 1, 0.5);
    REQUIRE(dets.size() == 1);
    const Ellipse& e = dets[0].ellipse;
    CHECK(e.a == doctest::Approx(8.0));
    CHECK(e.b == doctest::Approx(4.0));
    CHECK(e.theta > -kPi / 2);
    CHECK(e.theta <= kPi / 2);
    CHECK(angle_delta(e.theta / kPi, 0.7 + 0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(dets[0].class_id == 1);
  }

  TEST_CASE("decode keeps the best max_per_class peaks") {
    EncodedTargets h = EncodedTargets::zeros(64, 64, 4);
    const double scores[] = {0.6, 0.9, 0.7};
    for (int i = 0; i < 3; ++i) {
      h.heatmap.at(0, 2 + 4 * i, 2) = scores[i];
      h.square_length.at(0, 2 + 4 * i, 2) = 10.0;
      h.delta_a.at(0, 2 + 4 * i, 2) = 0.4;
      h.delta_b.at(0, 2 + 4 * i, 2) = 0.3;
    }
    const std::vector<Detection> dets = decode(h, 2, 0.5);
    REQUIRE(dets.size() == 2);
    CHECK(dets[0].score == 0.9);
    CHECK(dets[1].score == 0.7);
    CHECK(best_of_class(dets, 0)->score == 0.9);
    CHECK(best_of_class(dets, 1) == nullptr);
  }
}
