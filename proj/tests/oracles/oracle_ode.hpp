// Independent ODE oracle: adaptive Cash-Karp RK45 for the pointwise coupled
// nonlinearity i u' = conj(u) v, i v' = u^2.
#pragma once

#include <complex>
#include <utility>

namespace oracle {

std::pair<std::complex<double>, std::complex<double>> integrate_pointwise_ode(
    std::complex<double> u0, std::complex<double> v0, double T, double tol);

}  // namespace oracle
