#include <doctest.h>

#include <cmath>
#include <random>

#include "ellipsedet/errors.hpp"
#include "ellipsedet/synth.hpp"
#include "support/oracles.hpp"

using namespace ellipsedet;

namespace {

SceneSpec quiet_spec(std::uint64_t seed) {
  SceneSpec s = sample_spec(seed, SynthRanges{});
  s.noise_level = 0.0;
  s.shadow_count = 0;
  return s;
}

bool same_ellipse(const Ellipse& a, const Ellipse& b) {
  return a.cx == b.cx && a.cy == b.cy && a.a == b.a && a.b == b.b && a.theta == b.theta;
}

BinaryMask flip_mask(const BinaryMask& m) {
  BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) out.set(x, y, m.at(m.width() - 1 - x, y));
  }
  return out;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("sampling is deterministic") {
    for (std::uint64_t seed : {0ULL, 1ULL, 12345ULL, ~0ULL}) {
      const SceneSpec a = sample_spec(seed, SynthRanges{});
      const SceneSpec b = sample_spec(seed, SynthRanges{});
      CHECK(same_ellipse(a.thorax, b.thorax));
      CHECK(same_ellipse(a.heart, b.heart));
      CHECK(a.noise_level == b.noise_level);
      CHECK(a.shadow_count == b.shadow_count);
      CHECK(a.seed == b.seed);
    }
    CHECK_FALSE(same_ellipse(sample_spec(1, SynthRanges{}).thorax,
                             sample_spec(2, SynthRanges{}).thorax));
  }

  TEST_CASE("sampled specs satisfy their invariants") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const SceneSpec s = sample_spec(seed, SynthRanges{});
      REQUIRE(s.invariant_violation().empty());
      REQUIRE(s.heart.a <= 0.7 * s.thorax.a);
      REQUIRE(contains(s.thorax, s.heart.cx, s.heart.cy));
    }
  }

  TEST_CASE("CTR range is respected") {
    SynthRanges r;
    r.ctr_min = 0.4;
    r.ctr_max = 0.6;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const SceneSpec s = sample_spec(seed, r);
      const double ratio = s.heart.b / s.thorax.b;
      REQUIRE(ratio >= 0.4 - 1e-12);
      REQUIRE(ratio <= 0.6 + 1e-12);
    }
  }

  TEST_CASE("invalid ranges are rejected") {
    SynthRanges r;
    r.ctr_min = 0.7;
    r.ctr_max = 0.3;
    CHECK_THROWS_AS(sample_spec(1, r), InvalidArgument);
    SynthRanges tiny;
    tiny.image_w = 64;
    tiny.image_h = 48;
    CHECK_THROWS_AS(sample_spec(1, tiny), InvalidArgument);
    SynthRanges noise;
    noise.noise_min = -0.1;
    CHECK_THROWS_AS(sample_spec(1, noise), InvalidArgument);
  }

  TEST_CASE("render is deterministic and clamped") {
    const SceneSpec s = sample_spec(5, SynthRanges{});
    const Scene a = render(s);
    const Scene b = render(s);
    CHECK(a.image == b.image);
    for (float v : a.image.pixels) {
      REQUIRE(v >= 0.0F);
      REQUIRE(v <= 1.0F);
    }
    REQUIRE(a.annotations.size() == 2);
    CHECK(a.annotations[0].class_id == kThorax);
    CHECK(a.annotations[1].class_id == kHeart);
  }

  TEST_CASE("noiseless thorax ring is bright") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const SceneSpec s = quiet_spec(seed);
      const Scene scene = render(s);
      const Ellipse& t = s.thorax;
      const double c = std::cos(t.theta);
      const double sn = std::sin(t.theta);
      for (int k = 0; k < 72; ++k) {
        const double phi = 2 * kPi * k / 72;
        const double u = t.a * std::cos(phi);
        const double v = t.b * std::sin(phi);
        const int x = static_cast<int>(std::lround(t.cx + c * u - sn * v));
        const int y = static_cast<int>(std::lround(t.cy + sn * u + c * v));
        float peak = 0.0F;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) peak = std::max(peak, scene.image.at(x + dx, y + dy));
        }
        REQUIRE(peak >= 0.9F);
      }
    }
  }

  TEST_CASE("shadow wedges darken their region") {
    SceneSpec s = quiet_spec(17);
    s.shadow_count = 2;
    const Scene shaded = render(s);
    s.shadow_count = 0;
    const Scene clear = render(s);
    s.shadow_count = 2;
    const auto wedges = shadow_wedges(s);
    REQUIRE(wedges.size() == 2);
    double sum_shaded = 0.0;
    double sum_clear = 0.0;
    int n = 0;
    for (int y = 0; y < s.image_h; ++y) {
      for (int x = 0; x < s.image_w; ++x) {
        if (!wedges[0].covers(x, y) && !wedges[1].covers(x, y)) {
          REQUIRE(shaded.image.at(x, y) == clear.image.at(x, y));
          continue;
        }
        sum_shaded += shaded.image.at(x, y);
        sum_clear += clear.image.at(x, y);
        ++n;
      }
    }
    REQUIRE(n > 0);
    CHECK(sum_shaded / n < sum_clear / n);
    for (const ShadowWedge& w : wedges) CHECK(w.half_width <= 20.0 * kPi / 180.0 + 1e-12);
  }

  TEST_CASE("heart lies inside thorax") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const SceneSpec s = sample_spec(seed, SynthRanges{});
      const BinaryMask heart = rasterize_ellipse(s.heart, s.image_w, s.image_h);
      const BinaryMask thorax = rasterize_ellipse(s.thorax, s.image_w, s.image_h);
      CHECK(mask_dice(heart, heart) == 1.0);
      int inside = 0;
      int total = 0;
      for (int y = 0; y < s.image_h; ++y) {
        for (int x = 0; x < s.image_w; ++x) {
          if (!heart.at(x, y)) continue;
          ++total;
          inside += thorax.at(x, y) ? 1 : 0;
        }
      }
      REQUIRE(total > 0);
      REQUIRE(static_cast<double>(inside) >= 0.99 * total);
    }
  }

  TEST_CASE("identity augmentation") {
    const Scene scene = render(sample_spec(3, SynthRanges{}));
    const Scene out = apply_augment(scene, AugmentParams{});
    CHECK(out.image == scene.image);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(same_ellipse(out.annotations[i].ellipse, scene.annotations[i].ellipse));
    }
    const Scene none = augment(scene, 9, AugmentFlags{false, false, false, false});
    CHECK(none.image == scene.image);
  }

  TEST_CASE("flip is an involution") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Scene scene = render(sample_spec(seed, SynthRanges{}));
      AugmentParams p;
      p.flip = true;
      const Scene twice = apply_augment(apply_augment(scene, p), p);
      CHECK(twice.image == scene.image);
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(same_ellipse(twice.annotations[i].ellipse, scene.annotations[i].ellipse));
      }
    }
  }

  TEST_CASE("flip negates the angle") {
    Scene scene;
    scene.image = Image(64, 48);
    scene.annotations = {{kThorax, Ellipse::make(20, 24, 10, 6, kPi / 6)}};
    AugmentParams p;
    p.flip = true;
    const Scene out = apply_augment(scene, p);
    CHECK(out.annotations[0].ellipse.theta == doctest::Approx(-kPi / 6));
    CHECK(out.annotations[0].ellipse.cx == 43.0);
  }

  TEST_CASE("flipped annotations rasterise to flipped masks") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const Scene scene = render(sample_spec(seed, SynthRanges{}));
      AugmentParams p;
      p.flip = true;
      const Scene out = apply_augment(scene, p);
      for (std::size_t i = 0; i < 2; ++i) {
        const BinaryMask direct = rasterize_ellipse(out.annotations[i].ellipse, 256, 192);
        const BinaryMask mirrored =
            flip_mask(rasterize_ellipse(scene.annotations[i].ellipse, 256, 192));
        REQUIRE(direct == mirrored);
      }
    }
  }

  TEST_CASE("shifted annotations agree with shifted masks") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> shift(-12.0, 12.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Scene scene = render(sample_spec(seed, SynthRanges{}));
      AugmentParams p;
      p.shift_x = std::round(shift(rng) * 256) / 256;
      p.shift_y = std::round(shift(rng) * 256) / 256;
      const Scene out = apply_augment(scene, p);
      for (std::size_t i = 0; i < 2; ++i) {
        const Ellipse& e = scene.annotations[i].ellipse;
        const BinaryMask moved = rasterize_ellipse(out.annotations[i].ellipse, 256, 192);
        const BinaryMask base = rasterize_ellipse(e, 256, 192);
        // Every pixel of the shifted mask must have a source pixel within one
        // pixel of its exact preimage.
        for (int y = 0; y < 192; ++y) {
          for (int x = 0; x < 256; ++x) {
            if (!moved.at(x, y)) continue;
            const double sx = x - p.shift_x;
            const double sy = y - p.shift_y;
            bool found = false;
            for (int dy = -1; dy <= 1 && !found; ++dy) {
              for (int dx = -1; dx <= 1 && !found; ++dx) {
                const int ix = static_cast<int>(std::lround(sx)) + dx;
                const int iy = static_cast<int>(std::lround(sy)) + dy;
                found = ix >= 0 && iy >= 0 && ix < 256 && iy < 192 && base.at(ix, iy);
              }
            }
            REQUIRE(found);
          }
        }
      }
    }
  }

  TEST_CASE("scaling scales centres and axes") {
    const Scene scene = render(sample_spec(8, SynthRanges{}));
    AugmentParams p;
    p.scale = 1.1;
    const Scene out = apply_augment(scene, p);
    const Ellipse& before = scene.annotations[0].ellipse;
    const Ellipse& after = out.annotations[0].ellipse;
    CHECK(after.a == doctest::Approx(before.a * 1.1));
    CHECK(after.b == doctest::Approx(before.b * 1.1));
    CHECK(after.cx - 127.5 == doctest::Approx(1.1 * (before.cx - 127.5)).epsilon(1e-4));
    CHECK(after.theta == before.theta);
  }

  TEST_CASE("random augmentation keeps objects in frame and is seeded") {
    const Scene scene = render(sample_spec(11, SynthRanges{}));
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const Scene a = augment(scene, seed, AugmentFlags{});
      const Scene b = augment(scene, seed, AugmentFlags{});
      REQUIRE(a.image == b.image);
      REQUIRE(annotations_in_frame(a));
      for (const Annotation& ann : a.annotations) REQUIRE(ann.ellipse.is_valid());
    }
  }

  TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
    CHECK(quantize_center(1.0 / 512.0 + 3.0) == doctest::Approx(3.0 + 1.0 / 256.0).epsilon(1e-15));
  }
}
