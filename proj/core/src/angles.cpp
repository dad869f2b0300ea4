#include "ellipsedet/angles.hpp"

#include <cmath>

#include "ellipsedet/errors.hpp"

namespace ellipsedet {

double fold_angle(double theta) {
  if (!std::isfinite(theta)) {
    throw InvalidArgument("fold_angle: angle must be finite");
  }
  if (theta > -kHalfPi && theta <= kHalfPi) {
    return theta;
  }
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  double folded = c >= 0.0 ? std::atan2(s, c) : std::atan2(-s, -c);
  // atan2 can land on -pi/2 itself (cos rounds to +0); that end is open.
  if (folded <= -kHalfPi) {
    folded += kPi;
  } else if (folded > kHalfPi) {
    folded -= kPi;
  }
  return folded;
}

double wrapped_difference(double d1, double d2) {
  const double d = d1 - d2;
  return d - std::round(d);
}

double angle_delta(double d1, double d2) {
  return std::abs(wrapped_difference(d1, d2));
}

}  // namespace ellipsedet
