#pragma once

// Random scenes and loss configurations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ellipsedet/angles.hpp"
#include "ellipsedet/encoding.hpp"
#include "ellipsedet/losses.hpp"

namespace oracle {

using ellipsedet::Annotation;
using ellipsedet::Detection;
using ellipsedet::Ellipse;
using ellipsedet::EncodedTargets;
using ellipsedet::GridMap;
using ellipsedet::HeadGradients;
using ellipsedet::LossWeights;

/// Random scene whose centres are at least two grid cells apart (Chebyshev).
inline std::vector<Annotation> random_scene(std::mt19937_64& rng, int w, int h, int count) {
  std::uniform_real_distribution<double> ux(0.0, w - 1e-9);
  std::uniform_real_distribution<double> uy(0.0, h - 1e-9);
  std::uniform_real_distribution<double> axis(3.0, 60.0);
  std::uniform_real_distribution<double> ang(-2 * ellipsedet::kPi, 2 * ellipsedet::kPi);
  std::uniform_int_distribution<int> cls(0, 1);
  std::vector<Annotation> out;
  while (static_cast<int>(out.size()) < count) {
    double a = axis(rng);
    double b = axis(rng);
    if (a < b) std::swap(a, b);
    const Ellipse e = Ellipse::make(ux(rng), uy(rng), a, b, ang(rng));
    const bool far = std::all_of(out.begin(), out.end(), [&](const Annotation& o) {
      const int dx = static_cast<int>(std::floor(o.ellipse.cx / 4)) - static_cast<int>(std::floor(e.cx / 4));
      const int dy = static_cast<int>(std::floor(o.ellipse.cy / 4)) - static_cast<int>(std::floor(e.cy / 4));
      return std::max(std::abs(dx), std::abs(dy)) >= 2;
    });
    if (far) out.push_back({cls(rng), e});
  }
  return out;
}

inline const Detection* match(const std::vector<Detection>& dets, const Annotation& a) {
  const Detection* best = nullptr;
  double best_d = 1e30;
  for (const Detection& d : dets) {
    if (d.class_id != a.class_id) continue;
    const double dist = std::hypot(d.ellipse.cx - a.ellipse.cx, d.ellipse.cy - a.ellipse.cy);
    if (dist < best_d) {
      best_d = dist;
      best = &d;
    }
  }
  return best;
}

/// A small random scene encoded on a 32x32 input together with a random,
/// well-conditioned prediction of the same shape.
struct LossConfig {
  EncodedTargets gt;
  EncodedTargets pred;
  LossWeights weights;
};

inline LossConfig random_loss_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LossConfig c;
  std::vector<Annotation> scene;
  const int count = 1 + static_cast<int>(unit(rng) * 2.0);
  while (static_cast<int>(scene.size()) < count) {
    const double a = 3.0 + 10.0 * unit(rng);
    const double b = a * (0.3 + 0.7 * unit(rng));
    const Ellipse e = Ellipse::make(32.0 * unit(rng), 32.0 * unit(rng), a, b,
                                    ellipsedet::kPi * (unit(rng) - 0.5));
    bool far = true;
    for (const Annotation& o : scene) {
      far = far && (std::floor(o.ellipse.cx / 4) != std::floor(e.cx / 4) ||
                    std::floor(o.ellipse.cy / 4) != std::floor(e.cy / 4));
    }
    if (far) scene.push_back({static_cast<int>(unit(rng) * 2.0), e});
  }
  c.gt = ellipsedet::encode(scene, 32, 32, 4);
  c.pred = EncodedTargets::zeros(32, 32, 4);
  auto fill = [&](GridMap& m, double lo, double hi) {
    for (double& v : m.values()) v = lo + (hi - lo) * unit(rng);
  };
  fill(c.pred.heatmap, 0.02, 0.98);
  fill(c.pred.offset, 0.0, 1.0);
  fill(c.pred.square_length, 5.0, 60.0);
  fill(c.pred.delta_a, 0.05, 0.5);
  fill(c.pred.delta_b, 0.05, 0.5);
  fill(c.pred.delta_theta, -0.5, 0.5);
  c.weights.lambda_size = 0.05 + unit(rng);
  c.weights.lambda_off = 0.05 + unit(rng);
  c.weights.lambda_delta_theta = 0.5 + 5.0 * unit(rng);
  c.weights.lambda_q = 0.1 + unit(rng);
  c.weights.lambda_e = 0.1 + unit(rng);
  c.weights.alpha = 1.5 + unit(rng);
  c.weights.beta = 2.0 + 3.0 * unit(rng);
  return c;
}

struct MapPair {
  GridMap EncodedTargets::*pred;
  GridMap HeadGradients::*grad;
  const char* name;
};

constexpr MapPair kHeads[] = {
    {&EncodedTargets::heatmap, &HeadGradients::heatmap, "heatmap"},
    {&EncodedTargets::offset, &HeadGradients::offset, "offset"},
    {&EncodedTargets::square_length, &HeadGradients::square_length, "square_length"},
    {&EncodedTargets::delta_a, &HeadGradients::delta_a, "delta_a"},
    {&EncodedTargets::delta_b, &HeadGradients::delta_b, "delta_b"},
    {&EncodedTargets::delta_theta, &HeadGradients::delta_theta, "delta_theta"},
};

/// True when an L1 kink lies within `h` of the current value at a supervised cell.
inline bool near_kink(const oracle::LossConfig& c, const MapPair& head, std::size_t index, double h) {
  const GridMap& p = c.pred.*(head.pred);
  const auto plane = static_cast<std::size_t>(p.width() * p.height());
  const int cell = static_cast<int>(index % plane);
  const int x = cell % p.width();
  const int y = cell / p.width();
  if (head.pred == &EncodedTargets::heatmap || c.gt.center_mask.at(0, x, y) != 1.0) return false;
  const GridMap& g = c.gt.*(head.pred);
  const double pv = p.values()[index];
  const double gv = g.values()[index];
  if (head.pred == &EncodedTargets::delta_theta) {
    const double d = std::abs(ellipsedet::wrapped_difference(pv, gv));
    return d < 10 * h || d > 0.5 - 10 * h;
  }
  return std::abs(pv - gv) < 10 * h;
}

}  // namespace oracle
