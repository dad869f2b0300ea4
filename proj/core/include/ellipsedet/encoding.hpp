#pragma once

#include <span>
#include <vector>

#include "ellipsedet/angles.hpp"
#include "ellipsedet/geometry.hpp"

namespace ellipsedet {

inline constexpr int kThorax = 0;
inline constexpr int kHeart = 1;
inline constexpr int kNumClasses = 2;
inline constexpr int kDefaultStride = 4;

/// Channel-major dense grid of doubles at output-stride resolution.
class GridMap {
 public:
  GridMap() = default;
  GridMap(int channels, int width, int height, double fill = 0.0);

  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  double& at(int c, int x, int y) { return values_[index(c, x, y)]; }
  [[nodiscard]] double at(int c, int x, int y) const { return values_[index(c, x, y)]; }

  std::span<double> values() { return values_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }

  [[nodiscard]] bool same_shape(const GridMap& other) const {
    return channels_ == other.channels_ && width_ == other.width_ && height_ == other.height_;
  }

 private:
  [[nodiscard]] std::size_t index(int c, int x, int y) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height_) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int channels_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

struct Annotation {
  int class_id = kThorax;
  Ellipse ellipse;
};

/// A supervised grid cell: where a ground-truth centre was quantised to.
struct CenterCell {
  int class_id = 0;
  int x = 0;
  int y = 0;
  Ellipse ellipse;
};

/// Training targets, or network predictions of the same shape.
///
/// For targets, offset / square_length / delta maps are only meaningful where
/// center_mask is 1. For predictions every cell carries a value.
struct EncodedTargets {
  int stride = kDefaultStride;
  int input_w = 0;
  int input_h = 0;
  GridMap heatmap;        // num_classes channels, values in [0, 1]
  GridMap offset;         // 2 channels, sub-cell centre remainder
  GridMap square_length;  // 1 channel, input-pixel units
  GridMap delta_a;
  GridMap delta_b;
  GridMap delta_theta;
  GridMap center_mask;    // 1 channel
  std::vector<CenterCell> centers;

  /// All maps allocated with zeros for a grid of input_w / stride x input_h / stride.
  static EncodedTargets zeros(int input_w, int input_h, int stride, int num_classes = kNumClasses);

  [[nodiscard]] int grid_w() const { return heatmap.width(); }
  [[nodiscard]] int grid_h() const { return heatmap.height(); }
};

struct Detection {
  int class_id = 0;
  double score = 0.0;
  Ellipse ellipse;
};

/// Side of the extended square, 2 sqrt(a^2 + b^2).
double square_length(const Ellipse& e);

/// Heatmap Gaussian spread in grid cells for an object of square length l.
double splat_sigma(double square_len, int stride);

/// Builds training targets. Throws InvalidArgument when the stride does not
/// divide the image or an object centre lies outside it. Same-class objects
/// whose centres share a cell keep only the larger extended square.
EncodedTargets encode(std::span<const Annotation> scene, int input_w, int input_h,
                      int stride = kDefaultStride, int num_classes = kNumClasses);

/// Ellipse parameters read off the heads at one cell, before any
/// canonicalisation: centre (x + off) * stride, axes delta * l, angle dtheta * pi.
Ellipse decode_cell(const EncodedTargets& heads, int x, int y);

/// Peak extraction and ellipse reconstruction. A cell is a peak when no 3x3
/// neighbour is larger and no tied neighbour precedes it in row-major order.
/// Results are grouped by class, each group sorted by descending score.
std::vector<Detection> decode(const EncodedTargets& heads, int max_per_class,
                              double score_threshold);

/// Highest-scoring detection of `class_id`, or nullptr.
const Detection* best_of_class(std::span<const Detection> detections, int class_id);

}  // namespace ellipsedet
