#include "mrnls/state.hpp"

#include <cmath>
#include <stdexcept>

#include "mrnls/cutoff.hpp"

namespace mrnls {

StatePair make_state(std::shared_ptr<const Grid> grid, double kappa) {
    StatePair s;
    s.grid = std::move(grid);
    s.u.assign(s.grid->npoints(), cplx(0.0, 0.0));
    s.v.assign(s.grid->npoints(), cplx(0.0, 0.0));
    s.kappa = kappa;
    if (!(kappa > 0.0)) throw std::runtime_error("make_state: kappa must be positive");
    return s;
}

void check_pair(const StatePair& pair) {
    if (!pair.grid) throw std::runtime_error("StatePair: missing grid");
    const std::size_t np = pair.grid->npoints();
    if (pair.u.size() != np || pair.v.size() != np) {
        throw std::runtime_error("StatePair: field sizes do not match the grid");
    }
    if (!(pair.kappa > 0.0)) throw std::runtime_error("StatePair: kappa must be positive");
    for (std::size_t i = 0; i < np; ++i) {
        if (!std::isfinite(pair.u[i].real()) || !std::isfinite(pair.u[i].imag()) ||
            !std::isfinite(pair.v[i].real()) || !std::isfinite(pair.v[i].imag())) {
            throw std::runtime_error("StatePair: non-finite field value");
        }
    }
}

double l2sq(const Grid& g, const std::vector<cplx>& f) {
    if (f.size() != g.npoints()) throw std::runtime_error("l2sq: field size does not match grid");
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += g.weights[i] * std::norm(f[i]);
    return acc;
}

double spectral_l2sq(const Grid& g, const std::vector<cplx>& fhat) {
    if (fhat.size() != g.npoints()) {
        throw std::runtime_error("spectral_l2sq: field size does not match grid");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < fhat.size(); ++i) acc += g.kweights[i] * std::norm(fhat[i]);
    return acc;
}

double grad_l2sq(const SpectralPlan& plan, const std::vector<cplx>& f) {
    const Grid& g = plan.grid();
    std::vector<cplx> fhat = plan.forward(f);
    double acc = 0.0;
    for (std::size_t i = 0; i < fhat.size(); ++i) {
        acc += g.kweights[i] * (-plan.laplacian_symbol()[i]) * std::norm(fhat[i]);
    }
    return acc;
}

double sobolev_dot_sq(const SpectralPlan& plan, const std::vector<cplx>& f, double s) {
    const Grid& g = plan.grid();
    std::vector<cplx> fhat = plan.forward(f);
    double acc = 0.0;
    for (std::size_t i = 0; i < fhat.size(); ++i) {
        const double k2 = -plan.laplacian_symbol()[i];
        if (k2 == 0.0 && s < 0.0) continue;
        acc += g.kweights[i] * std::pow(k2, s) * std::norm(fhat[i]);
    }
    return acc;
}

std::vector<cplx> lp_project(const SpectralPlan& plan, const std::vector<cplx>& field,
                             double N, LpMode mode, std::array<double, 2> center) {
    const Grid& g = plan.grid();
    if (!(N > 0.0)) throw std::runtime_error("lp_project: N must be positive");
    if (g.kind == GridKind::radial4d && (center[0] != 0.0 || center[1] != 0.0)) {
        throw std::runtime_error(
            "lp_project: frequency center is not defined on radial grids");
    }
    std::vector<cplx> fhat = plan.forward(field);
    const std::size_t np = g.npoints();
    for (std::size_t i = 0; i < np; ++i) {
        const auto k = g.wavenumber(i);
        const double dist = std::hypot(k[0] - center[0], k[1] - center[1]);
        double mult = 0.0;
        switch (mode) {
            case LpMode::le: mult = smooth_cutoff(dist / N); break;
            case LpMode::gt: mult = 1.0 - smooth_cutoff(dist / N); break;
            case LpMode::eq:
                mult = smooth_cutoff(dist / N) - smooth_cutoff(2.0 * dist / N);
                break;
            case LpMode::lt: mult = smooth_cutoff(2.0 * dist / N); break;
            case LpMode::ge: mult = 1.0 - smooth_cutoff(2.0 * dist / N); break;
        }
        fhat[i] *= mult;
    }
    return plan.inverse(fhat);
}

StatePair lp_project(const StatePair& pair, double N, LpMode mode,
                     std::array<double, 2> center) {
    const SpectralPlan& plan = get_plan(pair.grid);
    StatePair out = pair;
    out.u = lp_project(plan, pair.u, N, mode, center);
    out.v = lp_project(plan, pair.v, N, mode, center);
    return out;
}

}  // namespace mrnls
