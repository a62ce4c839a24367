// Shared helpers for the test binaries: localized random fields and norm
// comparisons.
#pragma once

#include <cmath>
#include <vector>

#include "mrnls/random.hpp"
#include "mrnls/state.hpp"

namespace testutil {

using mrnls::cplx;

// Sum of a few Gaussian atoms c e^{i eta.x} e^{-|x-y|^2 / (2 s^2)}; localized
// in space and frequency so spectral resampling operations stay resolved.
inline std::vector<cplx> atom_field(const mrnls::Grid& g, mrnls::Rng& rng, int natoms,
                                    double smin, double smax, double ymax, double etamax) {
    std::vector<cplx> f(g.npoints(), cplx(0.0, 0.0));
    for (int a = 0; a < natoms; ++a) {
        const cplx c = rng.cnormal();
        const double s = rng.uniform(smin, smax);
        double y0 = 0.0, y1 = 0.0, e0 = 0.0, e1 = 0.0;
        if (g.kind == mrnls::GridKind::cartesian) {
            y0 = rng.uniform(-ymax, ymax);
            e0 = rng.uniform(-etamax, etamax);
            if (g.dims == 2) {
                y1 = rng.uniform(-ymax, ymax);
                e1 = rng.uniform(-etamax, etamax);
            }
        }
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto x = g.coord(i);
            const double d0 = x[0] - y0, d1 = x[1] - y1;
            const double r2 = d0 * d0 + d1 * d1;
            f[i] += c * std::polar(std::exp(-r2 / (2.0 * s * s)), e0 * x[0] + e1 * x[1]);
        }
    }
    return f;
}

inline double rel_l2_diff(const mrnls::Grid& g, const std::vector<cplx>& a,
                          const std::vector<cplx>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += g.weights[i] * std::norm(a[i] - b[i]);
        den += g.weights[i] * std::norm(b[i]);
    }
    return (den > 0.0) ? std::sqrt(num / den) : std::sqrt(num);
}

inline double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(const std::vector<cplx>& a) {
    double m = 0.0;
    for (const auto& z : a) m = std::max(m, std::abs(z));
    return m;
}

}  // namespace testutil
