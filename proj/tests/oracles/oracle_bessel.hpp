// Independent Bessel-zero oracle: bisection on std::cyl_bessel_j, no shared
// code with the library under test.
#pragma once

namespace oracle {

// k-th positive zero of J1 (k >= 1).
double bessel_j1_zero(int k);

}  // namespace oracle
