#pragma once

#include <array>
#include <span>
#include <vector>

#include "ellipsedet/encoding.hpp"
#include "ellipsedet/geometry.hpp"

namespace ellipsedet {

/// Probability clamp applied before every logarithm of the focal loss.
inline constexpr double kProbClamp = 1e-7;

/// Predicted axes are floored at this many pixels inside the IoU term.
inline constexpr double kMinIouAxis = 0.5;

struct LossWeights {
  double lambda_size = 0.1;
  double lambda_off = 1.0;
  double lambda_delta_theta = 5.0;
  double lambda_q = 1.0;
  double lambda_e = 1.0;
  double lambda_iou = 1.0;
  double alpha = 2.0;
  double beta = 4.0;

  /// Throws InvalidArgument for negative weights or non-positive alpha/beta.
  void validate() const;
};

struct LossBreakdown {
  double heatmap = 0.0;
  double size = 0.0;
  double offset = 0.0;
  double delta_a = 0.0;
  double delta_b = 0.0;
  double delta_theta = 0.0;
  double iou = 0.0;
  double total = 0.0;

  /// Square-detection part: heatmap + l_size * size + l_off * offset.
  [[nodiscard]] double square_term(const LossWeights& w) const;
  /// Ellipse-regression part: delta_a + delta_b + l_dtheta * delta_theta.
  [[nodiscard]] double ellipse_term(const LossWeights& w) const;
};

/// Where the IoU term reads the predicted ellipse from.
enum class IouAttachment {
  kGroundTruthCells,  // heads at the quantised ground-truth centre
  kPredictedPeaks,    // heads at the highest heatmap cell of the object's class
};

/// Penalty-reduced pixel focal loss, normalised by the number of cells whose
/// target equals 1. Throws InvalidArgument when there are none.
double focal_heatmap_loss(const GridMap& pred, const GridMap& gt, const LossWeights& weights);

/// Mean over masked cells of the channel-summed absolute error.
double l1_map_loss(const GridMap& pred, const GridMap& gt, const GridMap& mask);

struct RegressionLoss {
  double total = 0.0;
  double delta_a = 0.0;
  double delta_b = 0.0;
  double delta_theta = 0.0;
};

/// Delta-parameter losses at the ground-truth centres; the angle term uses the
/// wrap-aware distance so that -1/2 and 1/2 coincide.
RegressionLoss ellipse_regression_loss(const EncodedTargets& pred, const EncodedTargets& gt,
                                       const LossWeights& weights);

/// Mean DIoU loss over aligned pairs. Throws InvalidArgument on length mismatch.
double iou_loss_batch(std::span<const Ellipse> pred, std::span<const Ellipse> gt);

/// Where each ground-truth object is read from the prediction heads.
struct IouSite {
  int x = 0;
  int y = 0;
  Ellipse gt;
};

std::vector<IouSite> iou_sites(const EncodedTargets& pred, const EncodedTargets& gt,
                               IouAttachment attach);

/// Decoded prediction at a site with the axes floored at kMinIouAxis.
Ellipse iou_prediction(const EncodedTargets& pred, const IouSite& site);

/// Fills `total` from the component values.
LossBreakdown compose_total(LossBreakdown parts, const LossWeights& weights);

LossBreakdown total_loss(const EncodedTargets& pred, const EncodedTargets& gt,
                         const LossWeights& weights,
                         IouAttachment attach = IouAttachment::kGroundTruthCells);

/// Central-difference gradient of diou_loss with respect to the predicted
/// (cx, cy, a, b, theta), step 1e-4 * max(1, |parameter|).
std::array<double, 5> diou_gradient(const Ellipse& pred, const Ellipse& gt);

/// d(total)/d(head output) for every head. Heatmap gradients are taken with
/// respect to probabilities, delta_theta with respect to its raw value.
struct HeadGradients {
  GridMap heatmap;
  GridMap offset;
  GridMap square_length;
  GridMap delta_a;
  GridMap delta_b;
  GridMap delta_theta;
};

HeadGradients loss_gradients(const EncodedTargets& pred, const EncodedTargets& gt,
                             const LossWeights& weights,
                             IouAttachment attach = IouAttachment::kGroundTruthCells);

}  // namespace ellipsedet
