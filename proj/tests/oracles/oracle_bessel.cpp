#include "oracle_bessel.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

double bessel_j1_zero(int k) {
    if (k < 1) throw std::runtime_error("bessel_j1_zero: k must be >= 1");
    auto j1 = [](double x) { return std::cyl_bessel_j(1.0, x); };
    // March in steps of pi/8 from just past the origin (J1 vanishes at 0 but
    // that zero is not counted), bracketing sign changes.
    const double step = 0.39269908169872414;  // pi/8
    double a = 0.5;
    double fa = j1(a);
    int found = 0;
    for (int i = 0; i < 2000000; ++i) {
        const double b = a + step;
        const double fb = j1(b);
        if ((fa < 0.0 && fb >= 0.0) || (fa > 0.0 && fb <= 0.0)) {
            ++found;
            if (found == k) {
                double lo = a, hi = b, flo = fa;
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = j1(mid);
                    if ((flo < 0.0) == (fm < 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                    if (hi - lo < 1e-15 * hi) break;
                }
                return 0.5 * (lo + hi);
            }
        }
        a = b;
        fa = fb;
    }
    throw std::runtime_error("bessel_j1_zero: bracket search exhausted");
}

}  // namespace oracle
