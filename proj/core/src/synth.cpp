#include "ellipsedet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ellipsedet/errors.hpp"

namespace ellipsedet {

namespace {

constexpr double kFrameMargin = 4.0;
constexpr double kRingSigma = 1.2;  // ~3 px wide bright boundary
constexpr double kThoraxRingPeak = 1.0;
constexpr double kHeartRingPeak = 0.85;
constexpr double kShadowGain = 0.25;
constexpr double kMaxShadowHalfWidth = 20.0 * kPi / 180.0;
constexpr double kMinCenterSeparation = 12.0;  // Chebyshev distance, pixels
constexpr int kSpecAttempts = 1000;
constexpr int kAugmentAttempts = 100;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Approximate distance to the ellipse boundary: (rho - 1) / |grad rho| with
// rho the normalised radius.
double boundary_distance(const Ellipse& e, double c, double s, double x, double y) {
  const double dx = x - e.cx;
  const double dy = y - e.cy;
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  const double rho = std::sqrt((u * u) / (e.a * e.a) + (v * v) / (e.b * e.b));
  if (rho < 1e-9) return std::min(e.a, e.b);
  const double gu = u / (e.a * e.a * rho);
  const double gv = v / (e.b * e.b * rho);
  return (rho - 1.0) / std::sqrt(gu * gu + gv * gv);
}

bool fits_in_frame(const Ellipse& e, int w, int h, double margin) {
  const Point2 half = ellipse_half_extent(e);
  return e.cx - half.x >= margin && e.cx + half.x <= (w - 1) - margin &&
         e.cy - half.y >= margin && e.cy + half.y <= (h - 1) - margin;
}

bool ellipse_inside(const Ellipse& inner, const Ellipse& outer, double shrink) {
  if (outer.b <= shrink) return false;
  const Ellipse reduced{outer.cx, outer.cy, outer.a - shrink, outer.b - shrink, outer.theta};
  const double c = std::cos(inner.theta);
  const double s = std::sin(inner.theta);
  for (int k = 0; k < 72; ++k) {
    const double t = 2.0 * kPi * k / 72.0;
    const double lx = inner.a * std::cos(t);
    const double ly = inner.b * std::sin(t);
    if (!contains(reduced, inner.cx + c * lx - s * ly, inner.cy + s * lx + c * ly)) return false;
  }
  return true;
}

// A few random low-frequency sinusoids; gives the tissue some structure.
struct Texture {
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;

  explicit Texture(std::mt19937_64& rng) {
    for (int i = 0; i < 6; ++i) {
      const double angle = uniform(rng, 0.0, 2.0 * kPi);
      const double freq = uniform(rng, 0.02, 0.12);
      waves.push_back({freq * std::cos(angle), freq * std::sin(angle),
                       uniform(rng, 0.0, 2.0 * kPi), uniform(rng, 0.3, 1.0)});
    }
  }

  [[nodiscard]] double operator()(double x, double y) const {
    double v = 0.0;
    double norm = 0.0;
    for (const Wave& w : waves) {
      v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
      norm += w.amp;
    }
    return v / norm;  // in [-1, 1]
  }
};

}  // namespace

Image::Image(int w, int h, float fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw InvalidArgument("Image: dimensions must be positive");
  pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

void SynthRanges::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("invalid synth ranges: ") + what);
  };
  check(image_w > 0 && image_h > 0, "image dimensions must be positive");
  check(thorax_a_min > 0 && thorax_a_min <= thorax_a_max, "thorax_a range");
  check(thorax_aspect_min > 0 && thorax_aspect_min <= thorax_aspect_max && thorax_aspect_max <= 1,
        "thorax_aspect range");
  check(thorax_theta_max >= 0, "thorax_theta_max must be non-negative");
  check(ctr_min > 0 && ctr_min <= ctr_max && ctr_max < 1, "ctr range");
  check(heart_aspect_min > 0 && heart_aspect_min <= heart_aspect_max && heart_aspect_max <= 1,
        "heart_aspect range");
  check(axis_deg_min <= axis_deg_max, "axis range");
  check(heart_offset_max >= 0 && heart_offset_max < 1, "heart_offset_max");
  check(noise_min >= 0 && noise_min <= noise_max, "noise range");
  check(shadow_min >= 0 && shadow_min <= shadow_max, "shadow range");
}

std::string SceneSpec::invariant_violation() const {
  std::ostringstream os;
  if (!thorax.is_valid()) {
    os << "thorax: " << thorax.invariant_violation();
  } else if (!heart.is_valid()) {
    os << "heart: " << heart.invariant_violation();
  } else if (!contains(thorax, heart.cx, heart.cy)) {
    os << "heart centre outside thorax";
  } else if (heart.a > 0.7 * thorax.a) {
    os << "heart.a exceeds 0.7 * thorax.a";
  } else if (!fits_in_frame(thorax, image_w, image_h, kFrameMargin)) {
    os << "thorax closer than 4 px to the image border";
  } else if (noise_level < 0.0 || shadow_count < 0) {
    os << "noise level and shadow count must be non-negative";
  }
  return os.str();
}

bool ShadowWedge::covers(double x, double y) const {
  const double dx = x - apex_x;
  const double dy = y - apex_y;
  if (dy <= 0.0) return false;
  const double angle = std::atan2(dx, dy);  // 0 = straight down
  return std::abs(angle - direction) <= half_width;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double quantize_center(double v) { return std::round(v * 256.0) / 256.0; }

SceneSpec sample_spec(std::uint64_t seed, const SynthRanges& r) {
  r.validate();
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < kSpecAttempts; ++attempt) {
    SceneSpec spec;
    spec.image_w = r.image_w;
    spec.image_h = r.image_h;
    spec.seed = derive_seed(seed, 0xC0FFEE);

    const double ta = uniform(rng, r.thorax_a_min, r.thorax_a_max);
    const double tb = ta * uniform(rng, r.thorax_aspect_min, r.thorax_aspect_max);
    const double ttheta = uniform(rng, -r.thorax_theta_max, r.thorax_theta_max);
    Ellipse thorax{0.0, 0.0, ta, tb, fold_angle(ttheta)};
    const Point2 half = ellipse_half_extent(thorax);
    const double lo_x = half.x + kFrameMargin;
    const double hi_x = (r.image_w - 1) - half.x - kFrameMargin;
    const double lo_y = half.y + kFrameMargin;
    const double hi_y = (r.image_h - 1) - half.y - kFrameMargin;
    if (lo_x > hi_x || lo_y > hi_y) continue;
    thorax.cx = quantize_center(uniform(rng, lo_x, hi_x));
    thorax.cy = quantize_center(uniform(rng, lo_y, hi_y));

    const double hb = tb * uniform(rng, r.ctr_min, r.ctr_max);
    const double ha = hb / uniform(rng, r.heart_aspect_min, r.heart_aspect_max);
    const double axis = uniform(rng, r.axis_deg_min, r.axis_deg_max) * kPi / 180.0;
    const double ou = uniform(rng, -r.heart_offset_max, r.heart_offset_max) * ta;
    const double ov = uniform(rng, -r.heart_offset_max, r.heart_offset_max) * tb;
    const double c = std::cos(thorax.theta);
    const double s = std::sin(thorax.theta);
    Ellipse heart{quantize_center(thorax.cx + c * ou - s * ov),
                  quantize_center(thorax.cy + s * ou + c * ov), ha, hb,
                  fold_angle(thorax.theta + kHalfPi - axis)};

    spec.thorax = thorax;
    spec.heart = heart;
    spec.noise_level = uniform(rng, r.noise_min, r.noise_max);
    spec.shadow_count = std::uniform_int_distribution<int>(r.shadow_min, r.shadow_max)(rng);
    if (!spec.invariant_violation().empty()) continue;
    if (!ellipse_inside(heart, thorax, 2.0 * kRingSigma)) continue;
    // The regression maps hold one object per cell, so the two centres must
    // land in distinct stride-4 cells, also after the 0.8x augmentation zoom.
    if (std::max(std::abs(heart.cx - thorax.cx), std::abs(heart.cy - thorax.cy)) <
        kMinCenterSeparation) {
      continue;
    }
    return spec;
  }
  throw InvalidArgument("sample_spec: ranges admit no valid scene after 1000 attempts");
}

std::vector<ShadowWedge> shadow_wedges(const SceneSpec& spec) {
  std::mt19937_64 rng(derive_seed(spec.seed, 1));
  std::vector<ShadowWedge> out;
  for (int i = 0; i < spec.shadow_count; ++i) {
    ShadowWedge w;
    w.apex_x = uniform(rng, 0.2 * spec.image_w, 0.8 * spec.image_w);
    w.apex_y = -1.0;
    w.direction = uniform(rng, -kPi / 6.0, kPi / 6.0);
    w.half_width = uniform(rng, 6.0 * kPi / 180.0, kMaxShadowHalfWidth);
    out.push_back(w);
  }
  return out;
}

Scene render(const SceneSpec& spec) {
  if (auto why = spec.invariant_violation(); !why.empty()) {
    throw InvalidArgument("render: invalid scene spec: " + why);
  }
  Scene scene;
  scene.spec = spec;
  scene.annotations = {{kThorax, spec.thorax}, {kHeart, spec.heart}};
  scene.image = Image(spec.image_w, spec.image_h);

  std::mt19937_64 texture_rng(derive_seed(spec.seed, 0));
  const Texture texture(texture_rng);
  const auto wedges = shadow_wedges(spec);
  std::mt19937_64 noise_rng(derive_seed(spec.seed, 2));
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double tc = std::cos(spec.thorax.theta), ts = std::sin(spec.thorax.theta);
  const double hc = std::cos(spec.heart.theta), hs = std::sin(spec.heart.theta);
  for (int y = 0; y < spec.image_h; ++y) {
    for (int x = 0; x < spec.image_w; ++x) {
      const double t = texture(x, y);
      const double d_thorax = boundary_distance(spec.thorax, tc, ts, x, y);
      const double d_heart = boundary_distance(spec.heart, hc, hs, x, y);
      double v;
      if (d_heart < 0.0) {
        v = 0.12 + 0.04 * t;  // blood pool
      } else if (d_thorax < 0.0) {
        v = 0.32 + 0.08 * t;  // lung / tissue
      } else {
        v = 0.06 + 0.03 * t;
      }
      const double ring_t =
          kThoraxRingPeak * std::exp(-d_thorax * d_thorax / (2.0 * kRingSigma * kRingSigma));
      const double ring_h =
          kHeartRingPeak * std::exp(-d_heart * d_heart / (2.0 * kRingSigma * kRingSigma));
      v = std::max({v, ring_t, ring_h});
      for (const ShadowWedge& w : wedges) {
        if (w.covers(x, y)) v *= kShadowGain;
      }
      const double n = gauss(noise_rng);
      v += spec.noise_level * n;
      scene.image.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return scene;
}

bool annotations_in_frame(const Scene& scene) {
  for (const Annotation& ann : scene.annotations) {
    if (!fits_in_frame(ann.ellipse, scene.image.width, scene.image.height, 0.0)) return false;
  }
  return true;
}

Scene apply_augment(const Scene& scene, const AugmentParams& p) {
  const int w = scene.image.width;
  const int h = scene.image.height;
  const double mx = 0.5 * (w - 1);
  const double my = 0.5 * (h - 1);
  const bool warp = p.scale != 1.0 || p.shift_x != 0.0 || p.shift_y != 0.0;

  Scene out;
  out.spec = scene.spec;
  out.image = Image(w, h);
  if (!warp) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.image.at(x, y) = scene.image.at(p.flip ? w - 1 - x : x, y);
    }
  } else {
    // Inverse map each output pixel and sample bilinearly; outside is black.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double sx = mx + (x - p.shift_x - mx) / p.scale;
        const double sy = my + (y - p.shift_y - my) / p.scale;
        if (p.flip) sx = (w - 1) - sx;
        const double fx = std::floor(sx);
        const double fy = std::floor(sy);
        const int x0 = static_cast<int>(fx);
        const int y0 = static_cast<int>(fy);
        const double ax = sx - fx;
        const double ay = sy - fy;
        auto px = [&](int xi, int yi) -> double {
          if (xi < 0 || yi < 0 || xi >= w || yi >= h) return 0.0;
          return scene.image.at(xi, yi);
        };
        const double v = (1 - ay) * ((1 - ax) * px(x0, y0) + ax * px(x0 + 1, y0)) +
                         ay * ((1 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1));
        out.image.at(x, y) = static_cast<float>(v);
      }
    }
  }
  if (p.noise_sigma > 0.0) {
    std::mt19937_64 rng(p.noise_seed);
    std::normal_distribution<double> gauss(0.0, p.noise_sigma);
    for (float& v : out.image.pixels) {
      v = static_cast<float>(std::clamp(static_cast<double>(v) + gauss(rng), 0.0, 1.0));
    }
  }

  for (const Annotation& ann : scene.annotations) {
    Ellipse e = ann.ellipse;
    if (p.flip) {
      e.cx = (w - 1) - e.cx;
      e.theta = fold_angle(-e.theta);
    }
    if (warp) {
      e.cx = quantize_center(mx + p.scale * (e.cx - mx) + p.shift_x);
      e.cy = quantize_center(my + p.scale * (e.cy - my) + p.shift_y);
      e.a *= p.scale;
      e.b *= p.scale;
    }
    out.annotations.push_back({ann.class_id, e});
  }
  for (const Annotation& ann : out.annotations) {
    if (ann.class_id == kThorax) out.spec.thorax = ann.ellipse;
    if (ann.class_id == kHeart) out.spec.heart = ann.ellipse;
  }
  return out;
}

Scene augment(const Scene& scene, std::uint64_t seed, const AugmentFlags& flags) {
  std::mt19937_64 rng(seed);
  const int w = scene.image.width;
  const int h = scene.image.height;
  for (int attempt = 0; attempt < kAugmentAttempts; ++attempt) {
    AugmentParams p;
    p.flip = flags.flip && uniform(rng, 0.0, 1.0) < 0.5;
    if (flags.scale) p.scale = std::exp(uniform(rng, std::log(0.8), std::log(1.25)));
    if (flags.shift) {
      p.shift_x = std::round(uniform(rng, -0.1, 0.1) * w * 256.0) / 256.0;
      p.shift_y = std::round(uniform(rng, -0.1, 0.1) * h * 256.0) / 256.0;
    }
    if (flags.noise) {
      p.noise_sigma = uniform(rng, 0.0, 0.05);
      p.noise_seed = rng();
    }
    Scene out = apply_augment(scene, p);
    if (annotations_in_frame(out)) return out;
  }
  return scene;
}

}  // namespace ellipsedet
