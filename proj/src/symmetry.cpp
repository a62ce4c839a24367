#include "mrnls/symmetry.hpp"

#include <cmath>
#include <stdexcept>

namespace mrnls {

namespace {

constexpr double kPi = 3.14159265358979323846;

thread_local std::string g_resolution_warning;

// Samples of the band-limited interpolant of `field` at (x - x0) / lambda.
// Radial grids evaluate the Fourier-Bessel interpolant (x0 must be zero);
// cartesian grids run a chirp-z resample per axis on the FFT coefficients.
std::vector<cplx> dilate_shift(const SpectralPlan& plan, const std::vector<cplx>& spec,
                               double lambda, std::array<double, 2> x0) {
    const Grid& g = plan.grid();
    if (g.kind == GridKind::radial4d) {
        const int n = g.n;
        std::vector<cplx> out(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            out[static_cast<std::size_t>(k)] =
                plan.eval_interpolant(spec, g.nodes[static_cast<std::size_t>(k)] / lambda);
        }
        return out;
    }
    const int n = g.n;
    const double L = g.extent;
    const double h = L / n;
    const double dxi = 2.0 * kPi / L;
    const double step = h / lambda;
    const double cb = std::pow(2.0 * kPi, -0.5 * g.dims) * std::pow(dxi, g.dims);
    if (g.dims == 1) {
        const double a = (-L / 2.0 - x0[0]) / lambda;
        std::vector<cplx> out = trig_eval_progression(spec, dxi, a, step);
        for (auto& z : out) z *= cb;
        return out;
    }
    const double ax = (-L / 2.0 - x0[0]) / lambda;
    const double ay = (-L / 2.0 - x0[1]) / lambda;
    const std::size_t sn = static_cast<std::size_t>(n);
    std::vector<cplx> line(sn), mid(sn * sn), out(sn * sn);
    for (int jy = 0; jy < n; ++jy) {
        for (int jx = 0; jx < n; ++jx) line[static_cast<std::size_t>(jx)] = spec[static_cast<std::size_t>(jx) * sn + static_cast<std::size_t>(jy)];
        std::vector<cplx> vals = trig_eval_progression(line, dxi, ax, step);
        for (int m = 0; m < n; ++m) mid[static_cast<std::size_t>(m) * sn + static_cast<std::size_t>(jy)] = vals[static_cast<std::size_t>(m)];
    }
    for (int m = 0; m < n; ++m) {
        for (int jy = 0; jy < n; ++jy) line[static_cast<std::size_t>(jy)] = mid[static_cast<std::size_t>(m) * sn + static_cast<std::size_t>(jy)];
        std::vector<cplx> vals = trig_eval_progression(line, dxi, ay, step);
        for (int m2 = 0; m2 < n; ++m2) out[static_cast<std::size_t>(m) * sn + static_cast<std::size_t>(m2)] = cb * vals[static_cast<std::size_t>(m2)];
    }
    return out;
}

// A dilation with lambda < 1 asks for the field beyond the box, where the
// periodic interpolant would alias in far-away content; treat the field as
// decayed there instead. Pure shifts (lambda = 1) keep the periodic wrap.
void zero_outside_box(const Grid& g, double lambda, std::array<double, 2> x0,
                      std::vector<cplx>& out) {
    if (g.kind != GridKind::cartesian || lambda == 1.0) return;
    const double half = 0.5 * g.extent * (1.0 + 1e-12);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto x = g.coord(i);
        const double y0 = (x[0] - x0[0]) / lambda;
        const double y1 = (x[1] - x0[1]) / lambda;
        if (std::abs(y0) > half || (g.dims == 2 && std::abs(y1) > half)) {
            out[i] = cplx(0.0, 0.0);
        }
    }
}

void warn_if_underresolved(const SpectralPlan& plan, const std::vector<cplx>& out_field,
                           const std::vector<cplx>& in_spec, double lambda,
                           const char* opname) {
    const Grid& g = plan.grid();
    const std::size_t np = g.npoints();
    double tot = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
        const double w = g.weights[i] * std::norm(out_field[i]);
        tot += w;
        const auto x = g.coord(i);
        const bool outer = (g.kind == GridKind::radial4d)
                               ? (x[0] > 0.9 * g.extent)
                               : (std::max(std::abs(x[0]), std::abs(x[1])) > 0.45 * g.extent);
        if (outer) tail += w;
    }
    const double kmax = (g.kind == GridKind::radial4d) ? g.knodes.back()
                                                       : kPi * g.n / g.extent;
    const double thresh = 0.9 * kmax * lambda;
    double ktot = 0.0, ktail = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
        const double w = g.kweights[i] * std::norm(in_spec[i]);
        ktot += w;
        if (g.wavenumber_mag(i) > thresh) ktail += w;
    }
    if (tot > 0.0 && tail > 1e-8 * tot) {
        g_resolution_warning = std::string(opname) + ": scaled field carries mass near the grid boundary";
    } else if (ktot > 0.0 && ktail > 1e-8 * ktot) {
        g_resolution_warning = std::string(opname) + ": scaled field carries mass near the spectral cutoff";
    }
}

// h(theta, xi, x0, lambda) acting on one channel, with |.|-preserving phases
// applied pointwise after the dilation/translation.
std::vector<cplx> channel_transform(const SpectralPlan& plan, const std::vector<cplx>& w,
                                    double theta, std::array<double, 2> xi,
                                    std::array<double, 2> x0, double lambda,
                                    const char* opname) {
    const Grid& g = plan.grid();
    std::vector<cplx> base;
    if (lambda == 1.0 && x0[0] == 0.0 && x0[1] == 0.0) {
        base = w;
    } else {
        std::vector<cplx> spec = plan.forward(w);
        base = dilate_shift(plan, spec, lambda, x0);
        zero_outside_box(g, lambda, x0, base);
        if (lambda != 1.0) warn_if_underresolved(plan, base, spec, lambda, opname);
    }
    const double amp = std::pow(lambda, -0.5 * g.dims);
    const std::size_t np = g.npoints();
    std::vector<cplx> out(np);
    for (std::size_t i = 0; i < np; ++i) {
        const auto x = g.coord(i);
        out[i] = base[i] * std::polar(amp, theta + x[0] * xi[0] + x[1] * xi[1]);
    }
    return out;
}

}  // namespace

StatePair apply_symmetry(const SymmetryElement& g, const StatePair& pair) {
    check_pair(pair);
    if (!(g.lambda > 0.0)) throw std::runtime_error("apply_symmetry: lambda must be positive");
    const bool needs_cartesian = g.xi0[0] != 0.0 || g.xi0[1] != 0.0 || g.x0[0] != 0.0 || g.x0[1] != 0.0;
    if (pair.grid->kind == GridKind::radial4d && needs_cartesian) {
        throw std::runtime_error(
            "apply_symmetry: frequency and space shifts need a cartesian grid");
    }
    const SpectralPlan& plan = get_plan(pair.grid);
    StatePair out = pair;
    out.u = channel_transform(plan, pair.u, g.theta, g.xi0, g.x0, g.lambda, "apply_symmetry");
    const std::array<double, 2> xiv{g.xi0[0] / pair.kappa, g.xi0[1] / pair.kappa};
    out.v = channel_transform(plan, pair.v, g.theta / pair.kappa, xiv, g.x0, g.lambda,
                              "apply_symmetry");
    return out;
}

StatePair galilean_boost(const StatePair& pair, std::array<double, 2> xi, double t) {
    check_pair(pair);
    if (pair.grid->kind != GridKind::cartesian) {
        throw std::runtime_error("galilean_boost: cartesian grids only");
    }
    const SpectralPlan& plan = get_plan(pair.grid);
    const Grid& g = *pair.grid;
    const std::array<double, 2> shift{2.0 * t * xi[0], 2.0 * t * xi[1]};
    const double xi2 = xi[0] * xi[0] + xi[1] * xi[1];
    StatePair out = pair;
    const std::size_t np = g.npoints();
    for (int chan = 0; chan < 2; ++chan) {
        const double c = (chan == 0) ? 1.0 : 2.0;
        const std::vector<cplx>& w = (chan == 0) ? pair.u : pair.v;
        std::vector<cplx> spec = plan.forward(w);
        for (std::size_t j = 0; j < np; ++j) {
            const auto k = g.wavenumber(j);
            spec[j] *= std::polar(1.0, -(shift[0] * k[0] + shift[1] * k[1]));
        }
        std::vector<cplx> moved = plan.inverse(spec);
        for (std::size_t i = 0; i < np; ++i) {
            const auto x = g.coord(i);
            moved[i] *= std::polar(1.0, c * (x[0] * xi[0] + x[1] * xi[1]) - c * t * xi2);
        }
        ((chan == 0) ? out.u : out.v) = std::move(moved);
    }
    return out;
}

StatePair scaling_transform(const StatePair& pair, double lambda) {
    check_pair(pair);
    if (!(lambda > 0.0)) throw std::runtime_error("scaling_transform: lambda must be positive");
    const SpectralPlan& plan = get_plan(pair.grid);
    StatePair out = pair;
    const double amp = 1.0 / (lambda * lambda);
    for (int chan = 0; chan < 2; ++chan) {
        const std::vector<cplx>& w = (chan == 0) ? pair.u : pair.v;
        std::vector<cplx> base;
        if (lambda == 1.0) {
            base = w;
        } else {
            std::vector<cplx> spec = plan.forward(w);
            base = dilate_shift(plan, spec, lambda, {0.0, 0.0});
            zero_outside_box(*pair.grid, lambda, {0.0, 0.0}, base);
            warn_if_underresolved(plan, base, spec, lambda, "scaling_transform");
        }
        for (auto& z : base) z *= amp;
        ((chan == 0) ? out.u : out.v) = std::move(base);
    }
    out.t = lambda * lambda * pair.t;
    return out;
}

std::string take_resolution_warning() {
    std::string msg;
    msg.swap(g_resolution_warning);
    return msg;
}

}  // namespace mrnls
