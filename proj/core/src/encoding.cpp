#include "ellipsedet/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <spdlog/spdlog.h>

#include "ellipsedet/errors.hpp"

namespace ellipsedet {

GridMap::GridMap(int channels, int width, int height, double fill)
    : channels_(channels), width_(width), height_(height) {
  if (channels <= 0 || width <= 0 || height <= 0) {
    throw InvalidArgument("GridMap: dimensions must be positive");
  }
  values_.assign(static_cast<std::size_t>(channels) * static_cast<std::size_t>(width) *
                     static_cast<std::size_t>(height),
                 fill);
}

EncodedTargets EncodedTargets::zeros(int input_w, int input_h, int stride, int num_classes) {
  if (stride <= 0 || input_w <= 0 || input_h <= 0 || input_w % stride != 0 ||
      input_h % stride != 0) {
    throw InvalidArgument("stride must divide the input dimensions exactly");
  }
  if (num_classes <= 0) throw InvalidArgument("num_classes must be positive");
  const int gw = input_w / stride;
  const int gh = input_h / stride;
  EncodedTargets t;
  t.stride = stride;
  t.input_w = input_w;
  t.input_h = input_h;
  t.heatmap = GridMap(num_classes, gw, gh);
  t.offset = GridMap(2, gw, gh);
  t.square_length = GridMap(1, gw, gh);
  t.delta_a = GridMap(1, gw, gh);
  t.delta_b = GridMap(1, gw, gh);
  t.delta_theta = GridMap(1, gw, gh);
  t.center_mask = GridMap(1, gw, gh);
  return t;
}

double square_length(const Ellipse& e) { return 2.0 * std::sqrt(e.a * e.a + e.b * e.b); }

double splat_sigma(double square_len, int stride) {
  return std::max(1.0, square_len / (6.0 * stride));
}

namespace {

void splat_gaussian(GridMap& heatmap, int channel, int cx, int cy, double sigma) {
  const double reach = 3.0 * sigma;
  const int r = static_cast<int>(std::floor(reach));
  for (int dy = -r; dy <= r; ++dy) {
    const int y = cy + dy;
    if (y < 0 || y >= heatmap.height()) continue;
    for (int dx = -r; dx <= r; ++dx) {
      const int x = cx + dx;
      if (x < 0 || x >= heatmap.width()) continue;
      const double d2 = static_cast<double>(dx * dx + dy * dy);
      if (d2 > reach * reach) continue;
      const double v = std::exp(-d2 / (2.0 * sigma * sigma));
      double& cell = heatmap.at(channel, x, y);
      cell = std::max(cell, v);
    }
  }
}

}  // namespace

EncodedTargets encode(std::span<const Annotation> scene, int input_w, int input_h, int stride,
                      int num_classes) {
  EncodedTargets t = EncodedTargets::zeros(input_w, input_h, stride, num_classes);
  const int gw = t.grid_w();
  const int gh = t.grid_h();

  // Resolve same-class collisions first: one owner per (class, cell).
  std::vector<CenterCell> owners;
  for (const Annotation& ann : scene) {
    const Ellipse& e = ann.ellipse;
    if (ann.class_id < 0 || ann.class_id >= num_classes) {
      throw InvalidArgument("encode: class id out of range");
    }
    if (!(e.cx >= 0.0 && e.cx < input_w && e.cy >= 0.0 && e.cy < input_h)) {
      throw InvalidArgument("encode: object centre lies outside the image");
    }
    const int x = std::min(gw - 1, static_cast<int>(std::floor(e.cx / stride)));
    const int y = std::min(gh - 1, static_cast<int>(std::floor(e.cy / stride)));
    auto clash = std::find_if(owners.begin(), owners.end(), [&](const CenterCell& c) {
      return c.class_id == ann.class_id && c.x == x && c.y == y;
    });
    if (clash == owners.end()) {
      owners.push_back({ann.class_id, x, y, e});
      continue;
    }
    spdlog::warn("encode: two class-{} objects share grid cell ({}, {}); keeping the larger",
                 ann.class_id, x, y);
    if (square_length(e) > square_length(clash->ellipse)) clash->ellipse = e;
  }

  for (const CenterCell& cell : owners) {
    const Ellipse& e = cell.ellipse;
    const double l = square_length(e);
    splat_gaussian(t.heatmap, cell.class_id, cell.x, cell.y, splat_sigma(l, stride));
    t.offset.at(0, cell.x, cell.y) = e.cx / stride - cell.x;
    t.offset.at(1, cell.x, cell.y) = e.cy / stride - cell.y;
    t.square_length.at(0, cell.x, cell.y) = l;
    t.delta_a.at(0, cell.x, cell.y) = e.a / l;
    t.delta_b.at(0, cell.x, cell.y) = e.b / l;
    t.delta_theta.at(0, cell.x, cell.y) = fold_angle(e.theta) / kPi;
    t.center_mask.at(0, cell.x, cell.y) = 1.0;
  }
  // Peaks must be exactly 1 even if another object's splat overlapped.
  for (const CenterCell& cell : owners) t.heatmap.at(cell.class_id, cell.x, cell.y) = 1.0;
  t.centers = std::move(owners);
  return t;
}

Ellipse decode_cell(const EncodedTargets& heads, int x, int y) {
  const double l = heads.square_length.at(0, x, y);
  Ellipse e;
  e.cx = (x + heads.offset.at(0, x, y)) * heads.stride;
  e.cy = (y + heads.offset.at(1, x, y)) * heads.stride;
  e.a = heads.delta_a.at(0, x, y) * l;
  e.b = heads.delta_b.at(0, x, y) * l;
  e.theta = heads.delta_theta.at(0, x, y) * kPi;
  return e;
}

std::vector<Detection> decode(const EncodedTargets& heads, int max_per_class,
                              double score_threshold) {
  std::vector<Detection> out;
  const GridMap& hm = heads.heatmap;
  const int gw = hm.width();
  const int gh = hm.height();
  for (int c = 0; c < hm.channels(); ++c) {
    struct Peak {
      double score;
      int index;
      int x;
      int y;
    };
    std::vector<Peak> peaks;
    for (int y = 0; y < gh; ++y) {
      for (int x = 0; x < gw; ++x) {
        const double v = hm.at(c, x, y);
        if (!(v >= score_threshold)) continue;
        const int idx = y * gw + x;
        bool is_peak = true;
        for (int dy = -1; dy <= 1 && is_peak; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= gw || ny >= gh) continue;
            const double n = hm.at(c, nx, ny);
            if (n > v || (n == v && ny * gw + nx < idx)) {
              is_peak = false;
              break;
            }
          }
        }
        if (is_peak) peaks.push_back({v, idx, x, y});
      }
    }
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& p, const Peak& q) { return p.score > q.score; });
    int kept = 0;
    for (const Peak& p : peaks) {
      if (kept >= max_per_class) break;
      const Ellipse raw = decode_cell(heads, p.x, p.y);
      if (!(raw.a > 0.0 && raw.b > 0.0) || !std::isfinite(raw.a) || !std::isfinite(raw.b) ||
          !std::isfinite(raw.theta) || !std::isfinite(raw.cx) || !std::isfinite(raw.cy)) {
        continue;
      }
      out.push_back({c, p.score, Ellipse::canonical(raw.cx, raw.cy, raw.a, raw.b, raw.theta)});
      ++kept;
    }
  }
  return out;
}

const Detection* best_of_class(std::span<const Detection> detections, int class_id) {
  const Detection* best = nullptr;
  for (const Detection& d : detections) {
    if (d.class_id == class_id && (best == nullptr || d.score > best->score)) best = &d;
  }
  return best;
}

}  // namespace ellipsedet
