#include "ellipsedet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <tuple>

#include "ellipsedet/angles.hpp"
#include "ellipsedet/errors.hpp"

namespace ellipsedet {

namespace {

constexpr double kCollinearTol = 1e-9;   // normalised coordinates
constexpr double kEmptyAreaTol = 1e-12;  // normalised area

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double signed_area(const std::vector<Point2>& v) {
  const std::size_t n = v.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = v[i];
    const Point2& q = v[(i + 1) % n];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * twice;
}

// Drops repeated points and vertices lying on the segment between their
// neighbours, until no more can be removed.
void simplify(std::vector<Point2>& v) {
  bool changed = true;
  while (changed && v.size() >= 3) {
    changed = false;
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& prev = v[(i + n - 1) % n];
      const Point2& cur = v[i];
      const Point2& next = v[(i + 1) % n];
      const double dx = cur.x - prev.x;
      const double dy = cur.y - prev.y;
      const bool duplicate = dx * dx + dy * dy <= kCollinearTol * kCollinearTol;
      if (duplicate || std::abs(cross(prev, cur, next)) <= kCollinearTol) {
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
}

// One Sutherland-Hodgman pass against the left half-plane of edge a->b.
std::vector<Point2> clip_half_plane(const std::vector<Point2>& input, const Point2& a,
                                    const Point2& b) {
  std::vector<Point2> out;
  const std::size_t n = input.size();
  if (n == 0) return out;
  out.reserve(n + 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& cur = input[i];
    const Point2& prev = input[(i + n - 1) % n];
    const double s_cur = cross(a, b, cur);
    const double s_prev = cross(a, b, prev);
    const bool cur_in = s_cur >= -kCollinearTol;
    const bool prev_in = s_prev >= -kCollinearTol;
    if (cur_in != prev_in) {
      const double t = s_prev / (s_prev - s_cur);
      out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
    }
    if (cur_in) out.push_back(cur);
  }
  return out;
}

auto rect_key(const RotatedRect& r) { return std::tie(r.cx, r.cy, r.w, r.h, r.theta); }

}  // namespace

// ---------------------------------------------------------------------------
// Ellipse

std::string Ellipse::invariant_violation() const {
  std::ostringstream os;
  if (!std::isfinite(cx) || !std::isfinite(cy)) {
    os << "centre must be finite (cx=" << cx << ", cy=" << cy << ")";
  } else if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(theta)) {
    os << "axes and angle must be finite";
  } else if (!(b > 0.0)) {
    os << "a >= b > 0 violated: b=" << b << " is not positive";
  } else if (!(a >= b)) {
    os << "a >= b > 0 violated: a=" << a << " < b=" << b;
  } else if (!(theta > -kHalfPi && theta <= kHalfPi)) {
    os << "theta=" << theta << " outside (-pi/2, pi/2]";
  }
  return os.str();
}

Ellipse Ellipse::make(double cx, double cy, double a, double b, double theta) {
  if (!std::isfinite(theta)) {
    throw InvalidArgument("invalid ellipse: angle must be finite");
  }
  Ellipse e{cx, cy, a, b, fold_angle(theta)};
  if (auto why = e.invariant_violation(); !why.empty()) {
    throw InvalidArgument("invalid ellipse: " + why);
  }
  return e;
}

Ellipse Ellipse::canonical(double cx, double cy, double a, double b, double theta) {
  if (a < b) {
    std::swap(a, b);
    theta += kHalfPi;
  }
  return make(cx, cy, a, b, theta);
}

// ---------------------------------------------------------------------------
// BinaryMask

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw InvalidArgument("BinaryMask: dimensions must be positive");
  }
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::int64_t BinaryMask::count() const {
  return std::accumulate(bits_.begin(), bits_.end(), std::int64_t{0});
}

BinaryMask BinaryMask::flipped_horizontally() const {
  BinaryMask out(width_, height_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      out.set(width_ - 1 - x, y, at(x, y));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rectangles and polygons

RotatedRect ellipse_to_tight_rect(const Ellipse& e) {
  return {e.cx, e.cy, 2.0 * e.a, 2.0 * e.b, e.theta};
}

std::array<Point2, 4> rect_vertices(const RotatedRect& r) {
  const double c = std::cos(r.theta);
  const double s = std::sin(r.theta);
  const double hw = 0.5 * r.w;
  const double hh = 0.5 * r.h;
  constexpr std::array<std::array<double, 2>, 4> corners{{{1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
  std::array<Point2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    const double lx = corners[i][0] * hw;
    const double ly = corners[i][1] * hh;
    out[i] = {r.cx + c * lx - s * ly, r.cy + s * lx + c * ly};
  }
  return out;
}

ConvexPolygon to_polygon(const RotatedRect& r) {
  const auto v = rect_vertices(r);
  return ConvexPolygon{{v.begin(), v.end()}};
}

double polygon_area(const ConvexPolygon& p) { return std::abs(signed_area(p.vertices)); }

ConvexPolygon convex_intersection(const ConvexPolygon& p, const ConvexPolygon& q) {
  if (p.vertices.size() < 3 || q.vertices.size() < 3) return {};

  // Work in coordinates centred on p and scaled to unit extent so that the
  // tolerances are independent of the caller's units.
  double min_x = p.vertices[0].x, max_x = min_x, min_y = p.vertices[0].y, max_y = min_y;
  for (const auto* poly : {&p, &q}) {
    for (const auto& v : poly->vertices) {
      min_x = std::min(min_x, v.x);
      max_x = std::max(max_x, v.x);
      min_y = std::min(min_y, v.y);
      max_y = std::max(max_y, v.y);
    }
  }
  const double scale = std::max(max_x - min_x, max_y - min_y);
  if (!(scale > 0.0)) return {};
  const Point2 origin{0.5 * (min_x + max_x), 0.5 * (min_y + max_y)};
  auto normalise = [&](const std::vector<Point2>& in) {
    std::vector<Point2> out;
    out.reserve(in.size());
    for (const auto& v : in) out.push_back({(v.x - origin.x) / scale, (v.y - origin.y) / scale});
    return out;
  };

  std::vector<Point2> subject = normalise(p.vertices);
  const std::vector<Point2> clip = normalise(q.vertices);
  for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    subject = clip_half_plane(subject, clip[i], clip[(i + 1) % clip.size()]);
  }
  simplify(subject);
  if (subject.size() < 3 || std::abs(signed_area(subject)) < kEmptyAreaTol) return {};
  if (signed_area(subject) < 0.0) std::reverse(subject.begin(), subject.end());

  ConvexPolygon result;
  result.vertices.reserve(subject.size());
  for (const auto& v : subject) {
    result.vertices.push_back({v.x * scale + origin.x, v.y * scale + origin.y});
  }
  return result;
}

double rotated_rect_iou(const RotatedRect& r1, const RotatedRect& r2) {
  // Clip in a fixed argument order so swapping the inputs is bit-exact.
  const bool swap = rect_key(r2) < rect_key(r1);
  const RotatedRect& first = swap ? r2 : r1;
  const RotatedRect& second = swap ? r1 : r2;
  const double inter = polygon_area(convex_intersection(to_polygon(first), to_polygon(second)));
  const double area1 = first.w * first.h;
  const double area2 = second.w * second.h;
  const double uni = area1 + area2 - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

DiouComponents diou_components(const Ellipse& pred, const Ellipse& gt) {
  const RotatedRect rp = ellipse_to_tight_rect(pred);
  const RotatedRect rg = ellipse_to_tight_rect(gt);
  DiouComponents out;
  out.iou = rotated_rect_iou(rp, rg);
  const double dx = pred.cx - gt.cx;
  const double dy = pred.cy - gt.cy;
  out.rho2 = dx * dx + dy * dy;

  double min_x = pred.cx, max_x = pred.cx, min_y = pred.cy, max_y = pred.cy;
  for (const auto& r : {rp, rg}) {
    for (const auto& v : rect_vertices(r)) {
      min_x = std::min(min_x, v.x);
      max_x = std::max(max_x, v.x);
      min_y = std::min(min_y, v.y);
      max_y = std::max(max_y, v.y);
    }
  }
  const double ex = max_x - min_x;
  const double ey = max_y - min_y;
  out.c2 = ex * ex + ey * ey;
  return out;
}

double diou_loss(const Ellipse& pred, const Ellipse& gt) {
  const DiouComponents d = diou_components(pred, gt);
  return 1.0 - d.iou + d.rho2 / d.c2;
}

// ---------------------------------------------------------------------------
// Rasterisation

bool contains(const Ellipse& e, double x, double y) {
  const double c = std::cos(e.theta);
  const double s = std::sin(e.theta);
  const double dx = x - e.cx;
  const double dy = y - e.cy;
  const double u = (c * dx + s * dy) / e.a;
  const double v = (-s * dx + c * dy) / e.b;
  return u * u + v * v <= 1.0;
}

Point2 ellipse_half_extent(const Ellipse& e) {
  const double c = std::cos(e.theta);
  const double s = std::sin(e.theta);
  return {std::sqrt(e.a * e.a * c * c + e.b * e.b * s * s),
          std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c)};
}

BinaryMask rasterize_ellipse(const Ellipse& e, int width, int height, int supersample) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("rasterize_ellipse: width and height must be >= 1");
  }
  if (supersample < 1) {
    throw InvalidArgument("rasterize_ellipse: supersample must be >= 1");
  }
  BinaryMask mask(width, height);
  const Point2 half = ellipse_half_extent(e);
  const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - half.x)) - 1);
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(e.cx + half.x)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - half.y)) - 1);
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(e.cy + half.y)) + 1);
  if (x0 > x1 || y0 > y1) return mask;

  const double c = std::cos(e.theta);
  const double s = std::sin(e.theta);
  const int probes = supersample * supersample;
  auto inside = [&](double x, double y) {
    const double dx = x - e.cx;
    const double dy = y - e.cy;
    const double u = (c * dx + s * dy) / e.a;
    const double v = (-s * dx + c * dy) / e.b;
    return u * u + v * v <= 1.0;
  };

  for (int j = y0; j <= y1; ++j) {
    for (int i = x0; i <= x1; ++i) {
      if (supersample == 1) {
        if (inside(i, j)) mask.set(i, j);
        continue;
      }
      int hits = 0;
      for (int sy = 0; sy < supersample; ++sy) {
        const double py = j + (sy + 0.5) / supersample - 0.5;
        for (int sx = 0; sx < supersample; ++sx) {
          const double px = i + (sx + 0.5) / supersample - 0.5;
          hits += inside(px, py) ? 1 : 0;
        }
      }
      if (2 * hits > probes) mask.set(i, j);
    }
  }
  return mask;
}

double mask_dice(const BinaryMask& m1, const BinaryMask& m2) {
  if (m1.width() != m2.width() || m1.height() != m2.height()) {
    throw InvalidArgument("mask_dice: mask dimensions differ");
  }
  const auto b1 = m1.bits();
  const auto b2 = m2.bits();
  std::int64_t n1 = 0, n2 = 0, both = 0;
  for (std::size_t i = 0; i < b1.size(); ++i) {
    n1 += b1[i];
    n2 += b2[i];
    both += b1[i] & b2[i];
  }
  if (n1 + n2 == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(n1 + n2);
}

double ellipse_iou_oracle(const Ellipse& e1, const Ellipse& e2, int resolution) {
  if (resolution < 1) throw InvalidArgument("ellipse_iou_oracle: resolution must be positive");
  const Point2 h1 = ellipse_half_extent(e1);
  const Point2 h2 = ellipse_half_extent(e2);
  const double min_x = std::min(e1.cx - h1.x, e2.cx - h2.x);
  const double max_x = std::max(e1.cx + h1.x, e2.cx + h2.x);
  const double min_y = std::min(e1.cy - h1.y, e2.cy - h2.y);
  const double max_y = std::max(e1.cy + h1.y, e2.cy + h2.y);
  const double step = std::max(max_x - min_x, max_y - min_y) / resolution;
  const auto nx = static_cast<std::int64_t>(std::ceil((max_x - min_x) / step));
  const auto ny = static_cast<std::int64_t>(std::ceil((max_y - min_y) / step));

  // Scanline: the ellipse inequality is a quadratic in x on each sample row,
  // so each row contributes one contiguous run of sample indices.
  struct Quadratic {
    double cx, cy, qa, qb_per_dy, qc_per_dy2;
  };
  auto make_quadratic = [](const Ellipse& e) {
    const double c = std::cos(e.theta);
    const double s = std::sin(e.theta);
    const double ia2 = 1.0 / (e.a * e.a);
    const double ib2 = 1.0 / (e.b * e.b);
    return Quadratic{e.cx, e.cy, c * c * ia2 + s * s * ib2, 2.0 * c * s * (ia2 - ib2),
                     s * s * ia2 + c * c * ib2};
  };
  const Quadratic q1 = make_quadratic(e1);
  const Quadratic q2 = make_quadratic(e2);

  auto run = [&](const Quadratic& q, double y) -> std::pair<std::int64_t, std::int64_t> {
    const double dy = y - q.cy;
    const double b = q.qb_per_dy * dy;
    const double c = q.qc_per_dy2 * dy * dy - 1.0;
    const double disc = b * b - 4.0 * q.qa * c;
    if (disc < 0.0) return {1, 0};
    const double root = std::sqrt(disc);
    const double lo = q.cx + (-b - root) / (2.0 * q.qa);
    const double hi = q.cx + (-b + root) / (2.0 * q.qa);
    auto first = static_cast<std::int64_t>(std::ceil((lo - min_x) / step - 0.5));
    auto last = static_cast<std::int64_t>(std::floor((hi - min_x) / step - 0.5));
    first = std::max<std::int64_t>(first, 0);
    last = std::min<std::int64_t>(last, nx - 1);
    return {first, last};
  };

  std::int64_t n1 = 0, n2 = 0, both = 0;
  for (std::int64_t j = 0; j < ny; ++j) {
    const double y = min_y + (static_cast<double>(j) + 0.5) * step;
    const auto [f1, l1] = run(q1, y);
    const auto [f2, l2] = run(q2, y);
    n1 += std::max<std::int64_t>(0, l1 - f1 + 1);
    n2 += std::max<std::int64_t>(0, l2 - f2 + 1);
    both += std::max<std::int64_t>(0, std::min(l1, l2) - std::max(f1, f2) + 1);
  }
  const std::int64_t uni = n1 + n2 - both;
  if (uni == 0) return 0.0;
  return static_cast<double>(both) / static_cast<double>(uni);
}

BinaryMask ellipse_outline(const Ellipse& e, int width, int height) {
  BinaryMask mask(width, height);
  // Ramanujan's perimeter approximation sets the sampling density.
  const double h = std::pow((e.a - e.b) / (e.a + e.b), 2.0);
  const double perimeter =
      kPi * (e.a + e.b) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
  const int samples = std::max(64, static_cast<int>(std::ceil(perimeter * 8.0)));
  const double c = std::cos(e.theta);
  const double s = std::sin(e.theta);
  for (int k = 0; k < samples; ++k) {
    const double t = 2.0 * kPi * k / samples;
    const double lx = e.a * std::cos(t);
    const double ly = e.b * std::sin(t);
    const auto x = static_cast<long>(std::lround(e.cx + c * lx - s * ly));
    const auto y = static_cast<long>(std::lround(e.cy + s * lx + c * ly));
    if (x >= 0 && x < width && y >= 0 && y < height) {
      mask.set(static_cast<int>(x), static_cast<int>(y));
    }
  }
  return mask;
}

}  // namespace ellipsedet
