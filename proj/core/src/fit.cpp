#include "ellipsedet/fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "ellipsedet/angles.hpp"
#include "ellipsedet/detector/adam.hpp"
#include "ellipsedet/encoding.hpp"
#include "ellipsedet/errors.hpp"

namespace ellipsedet {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct Objective {
  double total = 0.0;
  double ellipse_term = 0.0;
  double iou_term = 0.0;
};

Objective evaluate(const Ellipse& p, const Ellipse& t, double l, const LossWeights& w) {
  Objective o;
  o.ellipse_term = std::abs(p.a - t.a) / l + std::abs(p.b - t.b) / l +
                   w.lambda_delta_theta * angle_delta(p.theta / kPi, t.theta / kPi);
  o.iou_term = diou_loss(p, t);
  o.total = w.lambda_e * o.ellipse_term + w.lambda_iou * o.iou_term;
  return o;
}

}  // namespace

Ellipse random_fit_init(const Ellipse& target, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half = 0.5 * square_length(target);
  const double cx = target.cx + half * (2.0 * unit(rng) - 1.0);
  const double cy = target.cy + half * (2.0 * unit(rng) - 1.0);
  const double a = target.a * (0.5 + unit(rng));
  const double b = target.b * (0.5 + unit(rng));
  const double theta = kPi * (unit(rng) - 0.5);
  return Ellipse::canonical(cx, cy, a, b, theta);
}

double ellipse_dice_oracle(const Ellipse& e1, const Ellipse& e2, int resolution) {
  const double iou = ellipse_iou_oracle(e1, e2, resolution);
  return 2.0 * iou / (1.0 + iou);
}

FitResult fit_ellipse(const FitConfig& config) {
  for (const Ellipse* e : {&config.target, &config.init}) {
    if (const std::string why = e->invariant_violation(); !why.empty()) {
      throw InvalidArgument("fit: " + why);
    }
  }
  config.weights.validate();
  if (config.max_steps < 0) throw InvalidArgument("fit: max_steps must be >= 0");
  if (!(config.lr_start > 0.0) || !(config.lr_end > 0.0)) {
    throw InvalidArgument("fit: learning rates must be positive");
  }

  const Ellipse& target = config.target;
  const double l = square_length(target);
  const double floor_axis = kMinIouAxis;
  const LossWeights& w = config.weights;

  // Centre and axes in units of l; the angle stays in radians.
  std::array<double, 5> q{config.init.cx / l, config.init.cy / l, config.init.a / l,
                          config.init.b / l, config.init.theta};
  auto to_ellipse = [&](const std::array<double, 5>& v) {
    return Ellipse{v[0] * l, v[1] * l, std::max(v[2] * l, floor_axis),
                   std::max(v[3] * l, floor_axis), v[4]};
  };

  Adam<double> adam(AdamSettings{config.lr_start});
  adam.add_block(q.size());

  FitResult result;
  const double decay = config.max_steps > 1
                           ? std::log(config.lr_end / config.lr_start) /
                                 static_cast<double>(config.max_steps - 1)
                           : 0.0;
  for (int step = 0; step <= config.max_steps; ++step) {
    const Ellipse p = to_ellipse(q);
    const Objective o = evaluate(p, target, l, w);
    if (!std::isfinite(o.total)) {
      throw NumericalError("fit: non-finite objective at step " + std::to_string(step));
    }
    result.trace.push_back({step, o.total, o.ellipse_term, o.iou_term});
    if (o.total <= config.tolerance) {
      result.converged_step = step;
      break;
    }
    if (step == config.max_steps) break;

    std::array<double, 5> g{};
    if (w.lambda_e > 0.0) {
      g[2] += w.lambda_e * sign(p.a - target.a);
      g[3] += w.lambda_e * sign(p.b - target.b);
      g[4] += w.lambda_e * w.lambda_delta_theta *
              sign(wrapped_difference(p.theta / kPi, target.theta / kPi)) / kPi;
    }
    if (w.lambda_iou > 0.0) {
      const std::array<double, 5> d = diou_gradient(p, target);
      // Chain through q -> pixels; a floored axis receives no IoU gradient.
      g[0] += w.lambda_iou * d[0] * l;
      g[1] += w.lambda_iou * d[1] * l;
      if (q[2] * l > floor_axis) g[2] += w.lambda_iou * d[2] * l;
      if (q[3] * l > floor_axis) g[3] += w.lambda_iou * d[3] * l;
      g[4] += w.lambda_iou * d[4];
    }
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw NumericalError("fit: non-finite gradient at step " + std::to_string(step));
      }
    }
    const double lr = config.lr_start * std::exp(decay * static_cast<double>(step));
    adam.begin_step();
    adam.update(0, std::span<double>(q), std::span<const double>(g), lr);
    q[2] = std::max(q[2], floor_axis / l);
    q[3] = std::max(q[3], floor_axis / l);
  }

  const Ellipse p = to_ellipse(q);
  result.final_ellipse = Ellipse::canonical(p.cx, p.cy, p.a, p.b, p.theta);
  result.final_dice = ellipse_dice_oracle(result.final_ellipse, target, config.dice_resolution);
  return result;
}

}  // namespace ellipsedet
