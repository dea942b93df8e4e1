#include "paultrap/fit.hpp"

#include <algorithm>
#include <cmath>

#include <gsl/gsl_fit.h>

#include "paultrap/errors.hpp"

namespace paultrap {

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ValidationError("fit_line: abscissa and ordinate lengths differ");
  if (x.size() < 2 || std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }))
    throw DegenerateFit("fit_line: need at least two distinct abscissae");
  double c0 = 0, c1 = 0, cov00 = 0, cov01 = 0, cov11 = 0, sumsq = 0;
  gsl_fit_linear(x.data(), 1, y.data(), 1, x.size(), &c0, &c1, &cov00, &cov01, &cov11, &sumsq);
  return {c1, c0, std::sqrt(std::max(0.0, cov11)), std::sqrt(std::max(0.0, cov00))};
}

} // namespace paultrap
