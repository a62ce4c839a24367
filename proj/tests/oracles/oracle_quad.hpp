// Independent quadrature oracles: composite Simpson on resampled data and a
// finite-difference derivative, for cross-checking grid quadrature and
// spectral derivatives without reusing the library's transform path.
#pragma once

#include <vector>

namespace oracle {

// Composite Simpson for uniformly spaced samples (odd count required).
double simpson_uniform(const std::vector<double>& vals, double h);

// integral_{R^4} f dx = 2 pi^2 integral_0^R f(r) r^3 dr for radial f sampled
// at the (non-uniform) radii r: resample with local degree-7 Lagrange
// interpolation onto `fine`+1 uniform points, then Simpson.
double radial4d_integral_resample(const std::vector<double>& r,
                                  const std::vector<double>& vals, double R, int fine);

// Interpolate non-uniform samples at x0 with a local 8-point Lagrange stencil.
double lagrange_interp(const std::vector<double>& x, const std::vector<double>& f,
                       double x0);

// Three-point finite-difference derivative on a non-uniform grid.
std::vector<double> fd_derivative(const std::vector<double>& x,
                                  const std::vector<double>& f);

}  // namespace oracle
