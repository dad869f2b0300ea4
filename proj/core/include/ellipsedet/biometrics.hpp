#pragma once

#include <span>
#include <vector>

#include "ellipsedet/geometry.hpp"

namespace ellipsedet {

/// A (heart, thorax) ellipse pair as predicted or annotated.
struct CardiacPair {
  Ellipse heart;
  Ellipse thorax;
};

/// Cardiothoracic ratio: heart minor axis over thorax minor axis.
double ctr(const Ellipse& heart, const Ellipse& thorax);

/// 1 - |r_true - r_pred| / r_true, unclamped. Throws InvalidArgument when r_true <= 0.
double ctr_precision(double r_true, double r_pred);

/// Signed angle in degrees, in (-90, 90], from the heart major axis (septum
/// proxy) to the thorax minor axis (chest-bisecting proxy), taken modulo 180.
///
/// The clinical measurement is defined on anatomical landmarks; with only two
/// ellipses available the septum is approximated by the long axis of the
/// cardiac ellipse and the anteroposterior chest line by the short axis of the
/// thoracic ellipse.
double cardiac_axis(const Ellipse& heart, const Ellipse& thorax);

struct BiometricReport {
  double ctr_true = 0.0;
  double ctr_pred = 0.0;
  double ctr_precision = 0.0;
  double cardiac_axis_deg = 0.0;  // of the prediction
  double cardiac_axis_true_deg = 0.0;
  double septum_dir_deg = 0.0;      // heart major-axis direction of the prediction
  double chest_line_dir_deg = 0.0;  // thorax minor-axis direction of the prediction
  double dice_thorax = 0.0;
  double dice_heart = 0.0;
  double dice_all = 0.0;
};

/// Rasterises all four ellipses on a width x height grid (pixel-centre
/// sampling) and fills dice, CTR and axis fields.
BiometricReport evaluate_pair(const CardiacPair& pred, const CardiacPair& gt, int width,
                              int height);

/// Mean over cases; P_avg is given both raw and with per-case values clamped at 0.
struct AggregateReport {
  int count = 0;
  double dice_thorax = 0.0;
  double dice_heart = 0.0;
  double dice_all = 0.0;
  double p_avg = 0.0;          // negative per-case precisions clamped to 0
  double p_avg_unclamped = 0.0;
  double axis_abs_error_deg = 0.0;
};

AggregateReport aggregate(std::span<const BiometricReport> reports);

}  // namespace ellipsedet
