#pragma once

#include <span>

namespace paultrap {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_error = 0.0; // 1-sigma, from the residual variance
  double intercept_error = 0.0;
};

/// Ordinary least squares y = intercept + slope * x. Throws DegenerateFit
/// with fewer than two distinct abscissae.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

} // namespace paultrap
