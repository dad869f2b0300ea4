#pragma once

#include <cstdint>
#include <vector>

#include "ellipsedet/geometry.hpp"
#include "ellipsedet/losses.hpp"

namespace ellipsedet {

/// Direct optimisation of one ellipse against a target, no network involved.
///
/// The objective is lambda_e * L_E + lambda_iou * L_IoU where L_E is the
/// delta-parameter L1 loss (axes over the target's square length, wrap-aware
/// angle) and L_IoU the DIoU loss on the tight rectangles. Parameters are
/// updated with Adam in units of the target's square length, with the
/// learning rate decayed geometrically from lr_start to lr_end.
struct FitConfig {
  Ellipse target;
  Ellipse init;
  LossWeights weights;
  int max_steps = 2000;
  double lr_start = 0.05;
  double lr_end = 1e-4;
  /// Stop as soon as the objective falls to this value.
  double tolerance = 1e-9;
  /// Lattice resolution of the final dice evaluation.
  int dice_resolution = 1024;
};

struct FitStep {
  int step = 0;
  double loss = 0.0;
  double ellipse_term = 0.0;
  double iou_term = 0.0;
};

struct FitResult {
  std::vector<FitStep> trace;
  Ellipse final_ellipse;
  double final_dice = 0.0;
  /// Step at which the tolerance was met, or -1.
  int converged_step = -1;
};

/// Throws InvalidArgument for invalid ellipses or settings and NumericalError
/// when the objective stops being finite.
FitResult fit_ellipse(const FitConfig& config);

/// Random starting point for a fit: centre uniform in the target's extended
/// square, each axis scaled by a factor in [0.5, 1.5], angle uniform.
Ellipse random_fit_init(const Ellipse& target, std::uint64_t seed);

/// Dice of two ellipses from the lattice IoU: 2 IoU / (1 + IoU).
double ellipse_dice_oracle(const Ellipse& e1, const Ellipse& e2, int resolution);

}  // namespace ellipsedet
