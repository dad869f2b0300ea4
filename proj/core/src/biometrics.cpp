#include "ellipsedet/biometrics.hpp"

#include <algorithm>
#include <cmath>

#include "ellipsedet/angles.hpp"
#include "ellipsedet/errors.hpp"

namespace ellipsedet {

namespace {

double to_degrees_half_open(double rad) {
  double deg = fold_angle(rad) * (180.0 / kPi);
  if (deg > 90.0) deg = 90.0;
  if (deg <= -90.0) deg = 90.0;
  return deg;
}

}  // namespace

double ctr(const Ellipse& heart, const Ellipse& thorax) { return heart.b / thorax.b; }

double ctr_precision(double r_true, double r_pred) {
  if (!(r_true > 0.0)) throw InvalidArgument("ctr_precision: true ratio must be positive");
  return 1.0 - std::abs(r_true - r_pred) / r_true;
}

double cardiac_axis(const Ellipse& heart, const Ellipse& thorax) {
  return to_degrees_half_open(thorax.theta + kHalfPi - heart.theta);
}

BiometricReport evaluate_pair(const CardiacPair& pred, const CardiacPair& gt, int width,
                              int height) {
  BiometricReport r;
  r.dice_thorax = mask_dice(rasterize_ellipse(pred.thorax, width, height),
                            rasterize_ellipse(gt.thorax, width, height));
  r.dice_heart = mask_dice(rasterize_ellipse(pred.heart, width, height),
                           rasterize_ellipse(gt.heart, width, height));
  r.dice_all = 0.5 * (r.dice_thorax + r.dice_heart);
  r.ctr_true = ctr(gt.heart, gt.thorax);
  r.ctr_pred = ctr(pred.heart, pred.thorax);
  r.ctr_precision = ctr_precision(r.ctr_true, r.ctr_pred);
  r.cardiac_axis_deg = cardiac_axis(pred.heart, pred.thorax);
  r.cardiac_axis_true_deg = cardiac_axis(gt.heart, gt.thorax);
  r.septum_dir_deg = to_degrees_half_open(pred.heart.theta);
  r.chest_line_dir_deg = to_degrees_half_open(pred.thorax.theta + kHalfPi);
  return r;
}

AggregateReport aggregate(std::span<const BiometricReport> reports) {
  AggregateReport a;
  a.count = static_cast<int>(reports.size());
  if (reports.empty()) return a;
  for (const BiometricReport& r : reports) {
    a.dice_thorax += r.dice_thorax;
    a.dice_heart += r.dice_heart;
    a.dice_all += r.dice_all;
    a.p_avg += std::max(0.0, r.ctr_precision);
    a.p_avg_unclamped += r.ctr_precision;
    a.axis_abs_error_deg +=
        std::abs(to_degrees_half_open((r.cardiac_axis_deg - r.cardiac_axis_true_deg) * kPi / 180.0));
  }
  const double n = static_cast<double>(reports.size());
  a.dice_thorax /= n;
  a.dice_heart /= n;
  a.dice_all /= n;
  a.p_avg /= n;
  a.p_avg_unclamped /= n;
  a.axis_abs_error_deg /= n;
  return a;
}

}  // namespace ellipsedet
