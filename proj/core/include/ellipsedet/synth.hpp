#pragma once

#include <cstdint>
#include <vector>

#include "ellipsedet/angles.hpp"
#include "ellipsedet/encoding.hpp"
#include "ellipsedet/geometry.hpp"

namespace ellipsedet {

/// Grey-level image, row-major, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, float fill = 0.0F);

  [[nodiscard]] float at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
  float& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Sampling ranges for synthetic four-chamber-like scenes.
struct SynthRanges {
  int image_w = 256;
  int image_h = 192;
  double thorax_a_min = 58.0;
  double thorax_a_max = 84.0;
  double thorax_aspect_min = 0.72;  // thorax b / a
  double thorax_aspect_max = 0.95;
  double thorax_theta_max = kPi / 6.0;  // |theta| bound
  double ctr_min = 0.35;                // heart b / thorax b
  double ctr_max = 0.65;
  double heart_aspect_min = 0.6;  // heart b / a
  double heart_aspect_max = 0.9;
  double axis_deg_min = 15.0;  // cardiac-axis angle range
  double axis_deg_max = 75.0;
  double heart_offset_max = 0.3;  // centre offset as a fraction of thorax axes
  double noise_min = 0.02;
  double noise_max = 0.10;
  int shadow_min = 0;
  int shadow_max = 2;

  /// Throws InvalidArgument for empty or nonsensical ranges.
  void validate() const;
};

struct SceneSpec {
  int image_w = 256;
  int image_h = 192;
  Ellipse thorax;
  Ellipse heart;
  double noise_level = 0.0;
  int shadow_count = 0;
  std::uint64_t seed = 0;

  /// Empty when the anatomy and framing constraints hold.
  [[nodiscard]] std::string invariant_violation() const;
};

struct Scene {
  Image image;
  std::vector<Annotation> annotations;  // thorax (class 0) then heart (class 1)
  SceneSpec spec;
};

/// Dark wedge with its apex above the top image edge.
struct ShadowWedge {
  double apex_x = 0.0;
  double apex_y = 0.0;
  double direction = 0.0;   // radians from straight down, positive towards +x
  double half_width = 0.0;  // radians

  [[nodiscard]] bool covers(double x, double y) const;
};

/// splitmix64 mix of (master, index); the per-item stream seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Rounds to the 1/256-pixel lattice used for scene centres.
double quantize_center(double v);

/// Rejection-samples a valid spec; identical seeds give identical specs.
/// Throws InvalidArgument after 1000 failed attempts.
SceneSpec sample_spec(std::uint64_t seed, const SynthRanges& ranges);

std::vector<ShadowWedge> shadow_wedges(const SceneSpec& spec);

Scene render(const SceneSpec& spec);

struct AugmentFlags {
  bool flip = true;
  bool scale = true;
  bool shift = true;
  bool noise = true;
};

struct AugmentParams {
  bool flip = false;
  double scale = 1.0;    // about the image centre
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
};

/// Applies one concrete transform to image and annotations. Does not check
/// that the objects stay in frame.
Scene apply_augment(const Scene& scene, const AugmentParams& params);

/// True when every annotated ellipse lies inside the image.
bool annotations_in_frame(const Scene& scene);

/// Draws random parameters (flip p=0.5, scale in [0.8, 1.25], shift up to
/// 10% per axis, noise sigma in [0, 0.05]) until the objects stay in frame;
/// after 100 failures returns the scene unchanged.
Scene augment(const Scene& scene, std::uint64_t seed, const AugmentFlags& flags);

}  // namespace ellipsedet
