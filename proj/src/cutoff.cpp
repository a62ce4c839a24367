#include "mrnls/cutoff.hpp"

#include <cmath>

namespace mrnls {

namespace {

// exp(-1/x) mollifier piece, extended by 0 for x <= 0.
double bump_piece(double x) {
    return x > 0.0 ? std::exp(-1.0 / x) : 0.0;
}

CutoffTable build_table() {
    CutoffTable t;
    const int npts = 32769;  // 32768 intervals on [0,2]
    t.smax = 2.0;
    t.ds = t.smax / (npts - 1);
    t.values.resize(npts);
    for (int i = 0; i < npts; ++i) {
        t.values[i] = smooth_cutoff_exact(i * t.ds);
    }
    return t;
}

}  // namespace

double smooth_cutoff_exact(double s) {
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return 0.0;
    const double y = s - 1.0;  // ramp coordinate in (0,1)
    const double a = bump_piece(1.0 - y);
    const double b = bump_piece(y);
    return a / (a + b);
}

const CutoffTable& cutoff_table() {
    static const CutoffTable table = build_table();
    return table;
}

double smooth_cutoff(double s) {
    if (s <= 1.0) return 1.0;
    const CutoffTable& t = cutoff_table();
    if (s >= t.smax) return 0.0;
    const double pos = s / t.ds;
    const int i = static_cast<int>(pos);
    const double frac = pos - i;
    return t.values[i] * (1.0 - frac) + t.values[i + 1] * frac;
}

}  // namespace mrnls
