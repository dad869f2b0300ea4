#pragma once

namespace ellipsedet {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = kPi / 2.0;

/// Maps any finite angle onto its representative in (-pi/2, pi/2] modulo pi.
///
/// Values already in range are returned unchanged, so the map is exactly
/// idempotent. Out-of-range values go through the atan2 half-plane rule:
/// atan2(sin t, cos t) when cos t >= 0 and atan2(-sin t, -cos t) otherwise.
double fold_angle(double theta);

/// Wrap-aware distance between two normalised angles (theta / pi).
///
/// For inputs in (-1/2, 1/2] this is min(|d1 - d2|, 1 - |d1 - d2|); other
/// finite inputs are reduced modulo 1 first. Result lies in [0, 1/2].
double angle_delta(double d1, double d2);

/// Signed wrapped difference d1 - d2 reduced into [-1/2, 1/2].
double wrapped_difference(double d1, double d2);

}  // namespace ellipsedet
