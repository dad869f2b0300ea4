#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ellipsedet {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Rotated ellipse in pixel coordinates (x right, y down).
///
/// `a` is the semi-major axis, `b` the semi-minor axis and `theta` the
/// direction of the major axis, i.e. the major axis points along
/// (cos theta, sin theta). Canonical instances satisfy a >= b > 0 and
/// theta in (-pi/2, pi/2]. The struct stays an aggregate so tests and
/// optimisers can hold raw parameter sets; use make() or canonical() to
/// obtain a checked value.
struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double a = 1.0;
  double b = 1.0;
  double theta = 0.0;

  /// Checks a >= b > 0 and finiteness, folds theta. Throws InvalidArgument
  /// naming the violated invariant.
  static Ellipse make(double cx, double cy, double a, double b, double theta);

  /// Like make(), but swaps the axes and turns theta by pi/2 when a < b.
  static Ellipse canonical(double cx, double cy, double a, double b, double theta);

  /// Empty string when valid, otherwise a description of the broken invariant.
  [[nodiscard]] std::string invariant_violation() const;
  [[nodiscard]] bool is_valid() const { return invariant_violation().empty(); }
};

struct RotatedRect {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;  // full extent along the rotated x axis
  double h = 1.0;  // full extent along the rotated y axis
  double theta = 0.0;
};

/// Convex polygon with counter-clockwise vertices (positive shoelace area).
struct ConvexPolygon {
  std::vector<Point2> vertices;

  [[nodiscard]] bool empty() const { return vertices.empty(); }
};

/// Dense row-major bit grid.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }

  [[nodiscard]] bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool value = true) { bits_[index(x, y)] = value ? 1 : 0; }

  [[nodiscard]] std::int64_t count() const;
  [[nodiscard]] std::span<const std::uint8_t> bits() const { return bits_; }

  /// Mirror about the vertical centre line (x -> width - 1 - x).
  [[nodiscard]] BinaryMask flipped_horizontally() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Oriented box sharing centre and angle with the ellipse, sides 2a x 2b.
RotatedRect ellipse_to_tight_rect(const Ellipse& e);

/// Corners in counter-clockwise order, starting at the (+w/2, +h/2) corner.
std::array<Point2, 4> rect_vertices(const RotatedRect& r);

ConvexPolygon to_polygon(const RotatedRect& r);

/// Shoelace area; zero for an empty polygon.
double polygon_area(const ConvexPolygon& p);

/// Intersection of two convex CCW polygons by successive half-plane clipping.
/// Near-duplicate and collinear vertices are removed; results whose area is
/// negligible relative to the inputs come back empty.
ConvexPolygon convex_intersection(const ConvexPolygon& p, const ConvexPolygon& q);

/// Area-based IoU of two rotated rectangles, clamped to [0, 1]. Exactly
/// symmetric in its arguments.
double rotated_rect_iou(const RotatedRect& r1, const RotatedRect& r2);

struct DiouComponents {
  double iou = 0.0;
  double rho2 = 0.0;  // squared centre distance
  double c2 = 0.0;    // squared diagonal of the axis-aligned box around both rects
};

DiouComponents diou_components(const Ellipse& pred, const Ellipse& gt);

/// 1 - IoU + rho^2 / c^2 evaluated on the tight rectangles.
double diou_loss(const Ellipse& pred, const Ellipse& gt);

/// True when pixel-space point (x, y) satisfies the ellipse inequality.
bool contains(const Ellipse& e, double x, double y);

/// Pixel (i, j) has its centre at (i, j). With supersample = s > 1 each pixel
/// is probed on an s x s grid and set when more than half the probes are inside.
BinaryMask rasterize_ellipse(const Ellipse& e, int width, int height, int supersample = 1);

/// 2|A n B| / (|A| + |B|); two empty masks give 1.
double mask_dice(const BinaryMask& m1, const BinaryMask& m2);

/// IoU of two ellipses by lattice counting over their joint bounding box.
/// `resolution` is the number of samples along the longer side of that box.
double ellipse_iou_oracle(const Ellipse& e1, const Ellipse& e2, int resolution);

/// Axis-aligned half extents of the ellipse.
Point2 ellipse_half_extent(const Ellipse& e);

/// One-pixel outline, traced by dense parametric sampling.
BinaryMask ellipse_outline(const Ellipse& e, int width, int height);

}  // namespace ellipsedet
