// Conserved quantities, run trackers, weight families, and the virial /
// Morawetz / interaction functionals with the long-time Strichartz monitor.
#include "mrnls/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>

#include "mrnls/cutoff.hpp"
#include "mrnls/spectral.hpp"

namespace mrnls {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        s += 0.5 * (f[i] + f[i + 1]) * (t[i + 1] - t[i]);
    }
    return s;
}

// Derivative components of a field: one (d/dr) on radial grids, dims axis
// derivatives on cartesian grids, all computed spectrally.
std::vector<std::vector<cplx>> derivative_components(const SpectralPlan& plan,
                                                     const std::vector<cplx>& f) {
    const Grid& g = plan.grid();
    std::vector<std::vector<cplx>> out;
    if (g.kind == GridKind::radial4d) {
        out.push_back(plan.radial_derivative(f));
        return out;
    }
    const std::vector<cplx> fhat = plan.forward(f);
    const std::size_t np = g.npoints();
    for (int a = 0; a < g.dims; ++a) {
        std::vector<cplx> dhat(np);
        for (std::size_t i = 0; i < np; ++i) {
            dhat[i] = cplx(0.0, g.wavenumber(i)[a]) * fhat[i];
        }
        out.push_back(plan.inverse(dhat));
    }
    return out;
}

int ladder_exponent(double value, double c0, const char* who) {
    if (!(value > 0.0)) {
        throw std::runtime_error(std::string(who) + ": ladder values must be positive");
    }
    const double x = std::log(value) / std::log(c0);
    const double e = std::round(x);
    if (std::abs(x - e) > 1e-9) {
        throw std::runtime_error(std::string(who) + ": value is not on the C0 ladder");
    }
    return static_cast<int>(e);
}

std::vector<int> ladder_exponents(const FrequencyScale& scale, const char* who) {
    if (!(scale.c0 > 1.0)) {
        throw std::runtime_error(std::string(who) + ": C0 must exceed 1");
    }
    if (scale.t_bounds.size() != scale.values.size() + 1 || scale.values.empty()) {
        throw std::runtime_error(std::string(who) +
                                 ": need one more boundary than interval values");
    }
    std::vector<int> e(scale.values.size());
    for (std::size_t k = 0; k < scale.values.size(); ++k) {
        e[k] = ladder_exponent(scale.values[k], scale.c0, who);
        if (k > 0 && std::abs(e[k] - e[k - 1]) > 1) {
            throw std::runtime_error(std::string(who) +
                                     ": consecutive ratios must lie in {1/C0, 1, C0}");
        }
    }
    return e;
}

// Cached weight tables; the family only depends on (L, mesh) and is
// read-only after construction.
const WeightFamily& cached_weights(double L, int mesh) {
    static std::mutex mu;
    static std::map<std::pair<double, int>, std::unique_ptr<WeightFamily>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{L, mesh}];
    if (!slot) slot = std::make_unique<WeightFamily>(weight_tables(L, mesh));
    return *slot;
}

StatePair project_pair(const StatePair& pair, double k_cut) {
    if (std::isinf(k_cut)) return pair;
    if (!(k_cut > 0.0)) {
        throw std::runtime_error("interaction/morawetz: frequency cut must be positive");
    }
    return lp_project(pair, k_cut, LpMode::le);
}

}  // namespace

double mass(const StatePair& pair) {
    check_pair(pair);
    return l2sq(*pair.grid, pair.u) + l2sq(*pair.grid, pair.v);
}

double energy(const StatePair& pair) {
    check_pair(pair);
    const SpectralPlan& plan = get_plan(pair.grid);
    const double gu = grad_l2sq(plan, pair.u);
    const double gv = grad_l2sq(plan, pair.v);
    double inter = 0.0;
    const Grid& g = *pair.grid;
    for (std::size_t i = 0; i < g.npoints(); ++i) {
        inter += g.weights[i] * std::real(pair.u[i] * pair.u[i] * std::conj(pair.v[i]));
    }
    return gu + 0.5 * pair.kappa * gv + inter;
}

double cubic_density(const StatePair& pair) {
    const Grid& g = *pair.grid;
    double s = 0.0;
    for (std::size_t i = 0; i < g.npoints(); ++i) {
        const double au = std::abs(pair.u[i]);
        const double av = std::abs(pair.v[i]);
        s += g.weights[i] * (au * au * au + av * av * av);
    }
    return s;
}

double gradient_norm_sq(const StatePair& pair) {
    const SpectralPlan& plan = get_plan(pair.grid);
    return grad_l2sq(plan, pair.u) + grad_l2sq(plan, pair.v);
}

double boundary_mass_fraction(const StatePair& pair, double frac) {
    const Grid& g = *pair.grid;
    if (g.kind != GridKind::radial4d) {
        throw std::runtime_error("boundary_mass_fraction: radial grids only");
    }
    const double cut = frac * g.extent;
    double tail = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < g.npoints(); ++i) {
        const double m = g.weights[i] * (std::norm(pair.u[i]) + std::norm(pair.v[i]));
        total += m;
        if (g.nodes[i] > cut) tail += m;
    }
    if (total <= 0.0) return 0.0;
    return tail / total;
}

// ---------------------------------------------------------------------------
// Scattering size and characteristic intervals
// ---------------------------------------------------------------------------

double scattering_size(const Trajectory& traj, double t0, double t1) {
    const std::vector<StatePair>& snaps = traj.snapshots;
    if (snaps.size() < 2) {
        throw std::runtime_error("scattering_size: at least two snapshots required");
    }
    if (!(t0 <= t1)) std::swap(t0, t1);
    const double lo = snaps.front().t;
    const double hi = snaps.back().t;
    const double slack = 1e-12 * (1.0 + std::abs(hi - lo));
    if (t0 < lo - slack || t1 > hi + slack) {
        throw std::runtime_error("scattering_size: window outside the recorded span");
    }
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);

    std::vector<double> times(snaps.size()), dens(snaps.size());
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        times[i] = snaps[i].t;
        dens[i] = cubic_density(snaps[i]);
    }
    // Trapezoid of the linear interpolant of the density, clipped to [t0, t1];
    // clipping at interior points keeps the rule exactly additive.
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        const double a = times[i], b = times[i + 1];
        if (b <= t0 || a >= t1 || b <= a) continue;
        const double ca = std::max(a, t0), cb = std::min(b, t1);
        const double fa = dens[i] + (dens[i + 1] - dens[i]) * (ca - a) / (b - a);
        const double fb = dens[i] + (dens[i + 1] - dens[i]) * (cb - a) / (b - a);
        s += 0.5 * (fa + fb) * (cb - ca);
    }
    return s;
}

Partition characteristic_partition(const std::vector<double>& time,
                                   const std::vector<double>& s_accumulator) {
    if (time.size() != s_accumulator.size() || time.size() < 2) {
        throw std::runtime_error(
            "characteristic_partition: need matching time/accumulator series");
    }
    for (std::size_t i = 0; i + 1 < time.size(); ++i) {
        if (!(time[i + 1] > time[i])) {
            throw std::runtime_error("characteristic_partition: time must increase");
        }
        if (s_accumulator[i + 1] < s_accumulator[i] - 1e-12) {
            throw std::runtime_error(
                "characteristic_partition: accumulator must be non-decreasing");
        }
    }
    Partition out;
    out.total_s = s_accumulator.back() - s_accumulator.front();
    if (out.total_s < 1.0) {
        out.note = "total scattering size below one unit; no characteristic interval";
        return out;
    }
    out.boundaries.push_back(time.front());
    const double s0 = s_accumulator.front();
    std::size_t seg = 0;
    for (int level = 1;; ++level) {
        const double target = s0 + level;
        if (target > s_accumulator.back() + 1e-12) break;
        while (seg + 1 < s_accumulator.size() && s_accumulator[seg + 1] < target) ++seg;
        if (seg + 1 >= s_accumulator.size()) break;
        const double ds = s_accumulator[seg + 1] - s_accumulator[seg];
        const double frac = (ds > 0.0) ? (target - s_accumulator[seg]) / ds : 1.0;
        out.boundaries.push_back(time[seg] + frac * (time[seg + 1] - time[seg]));
    }
    if (out.boundaries.size() < 2) {
        out.boundaries.clear();
        out.note = "total scattering size below one unit; no characteristic interval";
    }
    return out;
}

Partition characteristic_partition(const Trajectory& traj) {
    return characteristic_partition(traj.diagnostics.time, traj.diagnostics.scatter_s);
}

// ---------------------------------------------------------------------------
// Almost-periodicity parameter estimates
// ---------------------------------------------------------------------------

CenterEstimates track_centers(const StatePair& pair, double eta) {
    check_pair(pair);
    if (!(eta > 0.0 && eta < 0.5)) {
        throw std::runtime_error("track_centers: eta must lie in (0, 1/2)");
    }
    const Grid& g = *pair.grid;
    const std::size_t np = g.npoints();
    const double m_total = mass(pair);
    if (m_total <= 0.0) {
        throw std::runtime_error("track_centers: zero pair has no concentration scale");
    }
    const SpectralPlan& plan = get_plan(pair.grid);
    const std::vector<cplx> uhat = plan.forward(pair.u);
    const std::vector<cplx> vhat = plan.forward(pair.v);

    CenterEstimates est;
    const bool radial = (g.kind == GridKind::radial4d);
    if (!radial) {
        double mu = 0.0, mv = 0.0;
        std::array<double, 2> xc{0.0, 0.0}, ku{0.0, 0.0}, kv{0.0, 0.0};
        for (std::size_t i = 0; i < np; ++i) {
            const double md = g.weights[i] * (std::norm(pair.u[i]) + std::norm(pair.v[i]));
            const auto x = g.coord(i);
            xc[0] += md * x[0];
            xc[1] += md * x[1];
            const auto k = g.wavenumber(i);
            const double du = g.kweights[i] * std::norm(uhat[i]);
            const double dv = g.kweights[i] * std::norm(vhat[i]);
            mu += du;
            mv += dv;
            ku[0] += du * k[0];
            ku[1] += du * k[1];
            kv[0] += dv * k[0];
            kv[1] += dv * k[1];
        }
        est.x_est = {xc[0] / m_total, xc[1] / m_total};
        if (mu > 0.0) est.xi_est = {ku[0] / mu, ku[1] / mu};
        if (mv > 0.0) est.xi_v_est = {kv[0] / mv, kv[1] / mv};
    }
    // Smallest dyadic scale whose tightness tails both fall below eta * M,
    // with window constant C(eta) = eta^{-1/2} (documented deterministic
    // estimator; C grows as eta shrinks, and at eta = 0.1 the window sits
    // near the dyadic scale itself rather than an order above it).
    const double cwin = 1.0 / std::sqrt(eta);
    const std::array<double, 2> xiu = est.xi_est;
    const std::array<double, 2> xiv =
        radial ? std::array<double, 2>{0.0, 0.0}
               : std::array<double, 2>{2.0 * est.xi_est[0], 2.0 * est.xi_est[1]};
    for (int j = -30; j <= 30; ++j) {
        const double n = std::ldexp(1.0, j);
        const double rad = cwin / n;
        const double wid = cwin * n;
        double su = 0.0, sv = 0.0, fu = 0.0, fv = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            const auto x = g.coord(i);
            const double dx = std::hypot(x[0] - est.x_est[0], x[1] - est.x_est[1]);
            if (dx >= rad) {
                su += g.weights[i] * std::norm(pair.u[i]);
                sv += g.weights[i] * std::norm(pair.v[i]);
            }
            const auto k = g.wavenumber(i);
            if (std::hypot(k[0] - xiu[0], k[1] - xiu[1]) >= wid) {
                fu += g.kweights[i] * std::norm(uhat[i]);
            }
            if (std::hypot(k[0] - xiv[0], k[1] - xiv[1]) >= wid) {
                fv += g.kweights[i] * std::norm(vhat[i]);
            }
        }
        if (su + fu <= eta * m_total && sv + fv <= eta * m_total) {
            est.n_est = n;
            return est;
        }
    }
    throw std::runtime_error(
        "track_centers: no dyadic scale meets the tightness tails on this grid");
}

// ---------------------------------------------------------------------------
// Frequency-scale ladder
// ---------------------------------------------------------------------------

FrequencyScale quantize_frequency_scale(const std::vector<double>& t_bounds,
                                        const std::vector<double>& samples,
                                        double c0) {
    if (!(c0 > 1.0)) {
        throw std::runtime_error("quantize_frequency_scale: C0 must exceed 1");
    }
    if (t_bounds.size() != samples.size() + 1 || samples.empty()) {
        throw std::runtime_error(
            "quantize_frequency_scale: need one more boundary than samples");
    }
    FrequencyScale out;
    out.t_bounds = t_bounds;
    out.c0 = c0;
    out.values.resize(samples.size());
    const double logc = std::log(c0);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const double s = samples[k];
        if (!(s > 0.0)) {
            throw std::runtime_error("quantize_frequency_scale: samples must be positive");
        }
        double e = std::floor(std::log(s) / logc + 1e-12);
        double q = std::pow(c0, e);
        if (q > s * (1.0 + 1e-9)) {
            e -= 1.0;
            q = std::pow(c0, e);
        }
        out.values[k] = q;
    }
    return out;
}

FrequencyScale peak_level(const FrequencyScale& scale, int m) {
    if (m < 0) throw std::runtime_error("peak_level: m must be non-negative");
    std::vector<int> e = ladder_exponents(scale, "peak_level");
    const std::size_t kmax = e.size();
    for (int round = 0; round < m; ++round) {
        std::vector<int> next = e;
        std::size_t a = 0;
        while (a < kmax) {
            std::size_t b = a;
            while (b + 1 < kmax && e[b + 1] == e[a]) ++b;
            // Plateau [a, b]; a peak needs both outer neighbours one rung down.
            if (a > 0 && b + 1 < kmax && e[a - 1] == e[a] - 1 && e[b + 1] == e[a] - 1) {
                for (std::size_t k = a; k <= b; ++k) next[k] = e[k] - 1;
            }
            a = b + 1;
        }
        e.swap(next);
    }
    FrequencyScale out = scale;
    for (std::size_t k = 0; k < kmax; ++k) out.values[k] = std::pow(scale.c0, e[k]);
    return out;
}

double SmoothScale::value(double t) const {
    const std::vector<double>& tb = base.t_bounds;
    const std::vector<double>& v = base.values;
    const double inv = 1.0 / base.c0;
    if (t <= tb.front()) return inv * v.front();
    if (t >= tb[v.size() - 1]) return inv * v.back();
    const std::size_t k =
        static_cast<std::size_t>(std::upper_bound(tb.begin(), tb.end(), t) - tb.begin()) - 1;
    if (k + 1 >= v.size()) return inv * v.back();
    const double tau = (t - tb[k]) / (tb[k + 1] - tb[k]);
    const double s = tau * tau * (3.0 - 2.0 * tau);
    return inv * (v[k] + (v[k + 1] - v[k]) * s);
}

double SmoothScale::derivative(double t) const {
    const std::vector<double>& tb = base.t_bounds;
    const std::vector<double>& v = base.values;
    if (t <= tb.front() || t >= tb[v.size() - 1]) return 0.0;
    const std::size_t k =
        static_cast<std::size_t>(std::upper_bound(tb.begin(), tb.end(), t) - tb.begin()) - 1;
    if (k + 1 >= v.size()) return 0.0;
    const double len = tb[k + 1] - tb[k];
    const double tau = (t - tb[k]) / len;
    return (v[k + 1] - v[k]) * 6.0 * tau * (1.0 - tau) / (base.c0 * len);
}

SmoothScale smooth_frequency_scale(const FrequencyScale& leveled) {
    ladder_exponents(leveled, "smooth_frequency_scale");
    SmoothScale out;
    out.base = leveled;
    return out;
}

double estimate_c_star(const FrequencyScale& scale,
                       const std::vector<std::array<double, 2>>& xi_samples) {
    if (xi_samples.size() != scale.t_bounds.size()) {
        throw std::runtime_error(
            "estimate_c_star: need one frequency center per interval boundary");
    }
    double c = 1.0;
    for (std::size_t k = 0; k < scale.values.size(); ++k) {
        const double dxi = std::hypot(xi_samples[k + 1][0] - xi_samples[k][0],
                                      xi_samples[k + 1][1] - xi_samples[k][1]);
        const double nk = scale.values[k];
        const double kk = nk * nk * nk * (scale.t_bounds[k + 1] - scale.t_bounds[k]);
        c = std::max(c, 1024.0 * dxi / nk);
        if (kk > 0.0) c = std::max(c, 1024.0 * dxi / kk);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Weight families
// ---------------------------------------------------------------------------

namespace {

// Antiderivative table of the base cutoff on [0, 2].
struct ThetaAntiderivative {
    double h = 0.0;
    std::vector<double> cum;  // cum[i] = integral_0^{i h} theta
    ThetaAntiderivative() {
        const int n = 1 << 18;
        h = 2.0 / n;
        cum.resize(n + 1);
        cum[0] = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = smooth_cutoff(i * h);
            const double b = smooth_cutoff((i + 1) * h);
            cum[i + 1] = cum[i] + 0.5 * (a + b) * h;
        }
    }
    double operator()(double r) const {
        if (r <= 0.0) return 0.0;
        if (r >= 2.0) return cum.back();
        const double x = r / h;
        const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(x),
                                                    cum.size() - 2);
        const double frac = r - static_cast<double>(i) * h;
        // Midpoint rule over the partial cell keeps the table-level accuracy.
        return cum[i] + smooth_cutoff(static_cast<double>(i) * h + 0.5 * frac) * frac;
    }
};

const ThetaAntiderivative& theta_antiderivative() {
    static const ThetaAntiderivative table;
    return table;
}

double vartheta_profile(double r, double L, double margin) {
    return smooth_cutoff(std::max(0.0, r - L + margin));
}

}  // namespace

double big_theta_base(double r) {
    if (r <= 1e-12) return 1.0;
    if (r <= 1.0) return 1.0;  // theta = 1 on [0, 1], so the average is 1
    return theta_antiderivative()(r) / r;
}

double WeightFamily::eval_theta_l(double rr) const {
    if (rr <= 0.0) return theta_l.front();
    const double rmax = r.back();
    if (rr >= rmax) return 0.0;
    const double dr = r[1] - r[0];
    const std::size_t i =
        std::min<std::size_t>(static_cast<std::size_t>(rr / dr), r.size() - 2);
    const double frac = (rr - r[i]) / dr;
    return theta_l[i] + (theta_l[i + 1] - theta_l[i]) * frac;
}

double WeightFamily::eval_big_theta_l(double rr) const {
    if (rr <= 0.0) return big_theta_l.front();
    const double rmax = r.back();
    if (rr >= rmax) return theta_l_integral / rr;
    const double dr = r[1] - r[0];
    const std::size_t i =
        std::min<std::size_t>(static_cast<std::size_t>(rr / dr), r.size() - 2);
    const double frac = (rr - r[i]) / dr;
    return big_theta_l[i] + (big_theta_l[i + 1] - big_theta_l[i]) * frac;
}

WeightFamily weight_tables(double L, int mesh) {
    if (!(L >= 8.0)) {
        throw std::runtime_error(
            "weight_tables: L must be at least 8 so the plateau margins L-2 "
            "and the support separations stay positive");
    }
    if (mesh < 64) throw std::runtime_error("weight_tables: mesh too coarse");
    WeightFamily fam;
    fam.L = L;
    const int npts = mesh + 1;
    const double dr = 2.0 * L / mesh;
    fam.r.resize(npts);
    fam.theta.resize(npts);
    fam.big_theta.resize(npts);
    fam.vartheta.resize(npts);
    fam.chi.resize(npts);
    fam.theta_l.resize(npts);
    fam.big_theta_l.resize(npts);

    // theta_l(r) = (32 pi / L^4) int_0^L s^3 vartheta(s)
    //              int_0^{pi/2} vartheta(sqrt((r-s)^2 + 4 r s sin^2 psi))
    //              sin^2 psi cos^2 psi dpsi ds,
    // the 4D self-correlation reduced over the 3-sphere with the square-root
    // endpoints of the overlap kernel absorbed by u^2 = (r-s)^2 + 4rs sin^2.
    // The psi integrand is sin^2 cos^2 times the outer cutoff, which is 1
    // while u <= L-2 and 0 once u >= L.  The plateau piece has the closed
    // form int_0^psi sin^2 cos^2 = (psi - sin(4 psi)/4) / 8, so only the
    // ramp window [psi1, psi2] needs a quadrature pass.  A uniform psi rule
    // would under-resolve that window, which compresses like 1/L when r and
    // s are both large.
    const int ns = 768;    // Simpson panels in s over [0, L]
    const int nramp = 96;  // Simpson panels across the ramp window
    const double hs = L / ns;
    const auto plateau_int = [](double psi) {
        return 0.125 * (psi - 0.25 * std::sin(4.0 * psi));
    };
    const auto psi_of_u = [](double usq, double base, double cross) {
        const double x = (usq - base) / cross;
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 0.5 * kPi;
        return std::asin(std::sqrt(x));
    };
    std::vector<double> sw(ns + 1), sval(ns + 1);
    for (int j = 0; j <= ns; ++j) {
        const double s = j * hs;
        const double simpson = (j == 0 || j == ns) ? 1.0 : (j % 2 ? 4.0 : 2.0);
        sval[j] = s;
        sw[j] = simpson * (hs / 3.0) * s * s * s * vartheta_profile(s, L, 2.0);
    }
    for (int i = 0; i < npts; ++i) {
        const double rr = i * dr;
        fam.r[i] = rr;
        fam.theta[i] = smooth_cutoff(rr);
        fam.big_theta[i] = big_theta_base(rr);
        fam.vartheta[i] = vartheta_profile(rr, L, 2.0);
        fam.chi[i] = vartheta_profile(rr, L, 3.0);
        double acc = 0.0;
        for (int j = 0; j <= ns; ++j) {
            if (sw[j] == 0.0) continue;
            const double s = sval[j];
            const double base = (rr - s) * (rr - s);
            if (base >= L * L) continue;
            const double cross = std::max(4.0 * rr * s, 1e-300);
            const double psi1 = psi_of_u((L - 2.0) * (L - 2.0), base, cross);
            const double psi2 = psi_of_u(L * L, base, cross);
            double inner = plateau_int(psi1);
            if (psi2 > psi1) {
                const double h = (psi2 - psi1) / nramp;
                for (int q = 0; q <= nramp; ++q) {
                    const double psi = psi1 + q * h;
                    const double sp = std::sin(psi), cp = std::cos(psi);
                    const double u = std::sqrt(base + cross * sp * sp);
                    const double w =
                        (q == 0 || q == nramp) ? 1.0 : (q % 2 ? 4.0 : 2.0);
                    inner += w * (h / 3.0) * sp * sp * cp * cp *
                             vartheta_profile(u, L, 2.0);
                }
            }
            acc += sw[j] * inner;
        }
        fam.theta_l[i] = 32.0 * kPi * acc / (L * L * L * L);
    }
    // Running average big_theta_l by trapezoid accumulation on the mesh.
    double cum = 0.0;
    fam.big_theta_l[0] = fam.theta_l[0];
    for (int i = 1; i < npts; ++i) {
        cum += 0.5 * (fam.theta_l[i - 1] + fam.theta_l[i]) * dr;
        fam.big_theta_l[i] = cum / fam.r[i];
    }
    fam.theta_l_integral = cum;
    return fam;
}

// ---------------------------------------------------------------------------
// Virial identity
// ---------------------------------------------------------------------------

double virial_momentum(const StatePair& pair) {
    check_pair(pair);
    const Grid& g = *pair.grid;
    const SpectralPlan& plan = get_plan(pair.grid);
    const std::size_t np = g.npoints();
    const auto du = derivative_components(plan, pair.u);
    const auto dv = derivative_components(plan, pair.v);
    double acc = 0.0;
    if (g.kind == GridKind::radial4d) {
        for (std::size_t i = 0; i < np; ++i) {
            const double q = std::imag(std::conj(pair.u[i]) * du[0][i]) +
                             0.5 * std::imag(std::conj(pair.v[i]) * dv[0][i]);
            acc += g.weights[i] * g.nodes[i] * q;
        }
    } else {
        for (std::size_t i = 0; i < np; ++i) {
            const auto x = g.coord(i);
            double q = 0.0;
            for (int a = 0; a < g.dims; ++a) {
                q += x[a] * (std::imag(std::conj(pair.u[i]) * du[a][i]) +
                             0.5 * std::imag(std::conj(pair.v[i]) * dv[a][i]));
            }
            acc += g.weights[i] * q;
        }
    }
    return 4.0 * acc;
}

VirialCheck virial_rate_check(const Trajectory& traj) {
    const std::vector<StatePair>& snaps = traj.snapshots;
    if (snaps.size() < 3) {
        throw std::runtime_error("virial_rate_check: at least three snapshots required");
    }
    VirialCheck out;
    out.applicable = std::abs(snaps.front().kappa - 0.5) <= 1e-12;
    out.eight_e = 8.0 * energy(snaps.front());
    out.time.reserve(snaps.size());
    out.virial.reserve(snaps.size());
    for (const StatePair& s : snaps) {
        out.time.push_back(s.t);
        out.virial.push_back(virial_momentum(s));
    }
    const double denom = std::max(std::abs(out.eight_e), 1e-12);
    for (std::size_t i = 1; i + 1 < out.time.size(); ++i) {
        const double rate =
            (out.virial[i + 1] - out.virial[i - 1]) / (out.time[i + 1] - out.time[i - 1]);
        out.rate.push_back(rate);
        out.max_rel_defect =
            std::max(out.max_rel_defect, std::abs(rate - out.eight_e) / denom);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Morawetz functional (radial)
// ---------------------------------------------------------------------------

double morawetz_radial(const StatePair& pair, double ntilde, double L, double K) {
    check_pair(pair);
    if (pair.grid->kind != GridKind::radial4d) {
        throw std::runtime_error("morawetz_radial: radial grids only");
    }
    if (!(ntilde > 0.0) || !(L > 0.0)) {
        throw std::runtime_error("morawetz_radial: ntilde and L must be positive");
    }
    const StatePair uv = project_pair(pair, K);
    const Grid& g = *uv.grid;
    const SpectralPlan& plan = get_plan(uv.grid);
    const std::vector<cplx> du = plan.radial_derivative(uv.u);
    const std::vector<cplx> dv = plan.radial_derivative(uv.v);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.npoints(); ++i) {
        const double r = g.nodes[i];
        const double p = std::imag(std::conj(uv.u[i]) * du[i]) +
                         0.5 * std::imag(std::conj(uv.v[i]) * dv[i]);
        acc += g.weights[i] * big_theta_base(ntilde * r / L) * ntilde * r * p;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Interaction functional
// ---------------------------------------------------------------------------

InteractionDensities interaction_densities(const StatePair& pair,
                                           const InteractionOptions& opt) {
    check_pair(pair);
    const StatePair uv = project_pair(pair, opt.k_cut);
    const Grid& g = *uv.grid;
    const SpectralPlan& plan = get_plan(uv.grid);
    const std::size_t np = g.npoints();
    const auto du = derivative_components(plan, uv.u);
    const auto dv = derivative_components(plan, uv.v);
    const double cg = opt.quarter_e2 ? 0.25 : 0.5 * uv.kappa;

    InteractionDensities d;
    d.m.resize(np);
    d.p.assign(np, {0.0, 0.0});
    d.e2.resize(np);
    d.e3.resize(np);
    for (std::size_t i = 0; i < np; ++i) {
        d.m[i] = std::norm(uv.u[i]) + std::norm(uv.v[i]);
        d.e3[i] = std::real(uv.u[i] * uv.u[i] * std::conj(uv.v[i]));
        double e2 = 0.0;
        for (std::size_t a = 0; a < du.size(); ++a) {
            d.p[i][a] = std::imag(std::conj(uv.u[i]) * du[a][i]) +
                        0.5 * std::imag(std::conj(uv.v[i]) * dv[a][i]);
            e2 += std::norm(du[a][i]) + cg * std::norm(dv[a][i]);
        }
        d.e2[i] = e2;
    }
    return d;
}

InteractionResult interaction_functional(const StatePair& pair,
                                         const InteractionOptions& opt) {
    if (!(opt.ntilde > 0.0)) {
        throw std::runtime_error("interaction_functional: ntilde must be positive");
    }
    const WeightFamily& fam = cached_weights(opt.L, 1024);
    InteractionResult out;
    out.densities = interaction_densities(pair, opt);
    const Grid& g = *pair.grid;
    const std::size_t np = g.npoints();
    const InteractionDensities& d = out.densities;
    const double nt = opt.ntilde;

    if (g.kind == GridKind::radial4d) {
        // Radial reduction: with p(x) = p_r(|x|) x/|x| and m(y) = m(|y|), the
        // inner integral over y is a vector along x of magnitude
        //   J(r) = int_0^inf s^3 m(s) q(r, s) ds,
        //   q(r, s) = 4 pi int_0^pi Theta_L(nt sqrt(r^2+s^2-2rs cos)) (r - s cos)
        //             sin^2 dgamma,
        // and M = nt int p_r(|x|) J(|x|) dx.
        const int ng = 128;
        const double hg = kPi / ng;
        std::vector<double> cosg(ng + 1), gw(ng + 1);
        for (int q = 0; q <= ng; ++q) {
            const double gamma = q * hg;
            const double simpson = (q == 0 || q == ng) ? 1.0 : (q % 2 ? 4.0 : 2.0);
            cosg[q] = std::cos(gamma);
            const double s = std::sin(gamma);
            gw[q] = simpson * (hg / 3.0) * s * s;
        }
        std::vector<double> jr(np, 0.0);
        for (std::size_t i = 0; i < np; ++i) {
            const double r = g.nodes[i];
            double acc = 0.0;
            for (std::size_t j = 0; j < np; ++j) {
                const double s = g.nodes[j];
                const double mj = d.m[j] * g.weights[j] / (2.0 * kPi * kPi);
                if (mj == 0.0) continue;
                double q_rs = 0.0;
                for (int q = 0; q <= ng; ++q) {
                    const double u2 = r * r + s * s - 2.0 * r * s * cosg[q];
                    const double u = std::sqrt(std::max(u2, 0.0));
                    q_rs += gw[q] * fam.eval_big_theta_l(nt * u) * (r - s * cosg[q]);
                }
                acc += mj * 4.0 * kPi * q_rs;
            }
            jr[i] = acc;
        }
        double total = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            total += g.weights[i] * d.p[i][0] * jr[i];
        }
        out.value = nt * total;
        return out;
    }

    const double pairs = static_cast<double>(np) * static_cast<double>(np);
    if (pairs > opt.pair_budget) {
        throw std::runtime_error(
            "interaction_functional: " + std::to_string(np) + " grid points need " +
            std::to_string(pairs) + " kernel pairs, over the budget " +
            std::to_string(opt.pair_budget) + "; use at most " +
            std::to_string(static_cast<std::size_t>(std::sqrt(opt.pair_budget))) +
            " points (coarser or smaller grid)");
    }
    std::vector<std::array<double, 2>> x(np);
    for (std::size_t i = 0; i < np; ++i) x[i] = g.coord(i);
    double total = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
        const double wi = g.weights[i];
        for (std::size_t j = 0; j < i; ++j) {
            const double d0 = x[i][0] - x[j][0];
            const double d1 = x[i][1] - x[j][1];
            const double rho = std::hypot(d0, d1);
            const double ker = fam.eval_big_theta_l(nt * rho);
            if (ker == 0.0) continue;
            const double wij = wi * g.weights[j] * ker;
            // (i as x, j as y) and (j as x, i as y) share the kernel value.
            total += wij * ((d0 * d.p[i][0] + d1 * d.p[i][1]) * d.m[j] -
                            (d0 * d.p[j][0] + d1 * d.p[j][1]) * d.m[i]);
        }
    }
    out.value = nt * total;
    return out;
}

InteractionWindow interaction_window(const StatePair& pair,
                                     const InteractionOptions& opt,
                                     std::array<double, 2> z) {
    if (!(opt.ntilde > 0.0)) {
        throw std::runtime_error("interaction_window: ntilde must be positive");
    }
    if (!(opt.L >= 8.0)) {
        throw std::runtime_error("interaction_window: L must be at least 8");
    }
    const Grid& g = *pair.grid;
    if (g.kind == GridKind::radial4d && (z[0] != 0.0 || z[1] != 0.0)) {
        throw std::runtime_error(
            "interaction_window: radial grids support the centered window only");
    }
    const InteractionDensities d = interaction_densities(pair, opt);
    const std::size_t np = g.npoints();
    InteractionWindow win;
    for (std::size_t i = 0; i < np; ++i) {
        const auto x = g.coord(i);
        const double dist = (g.kind == GridKind::radial4d)
                                ? opt.ntilde * g.nodes[i]
                                : std::hypot(opt.ntilde * x[0] - z[0],
                                             opt.ntilde * x[1] - z[1]);
        const double w = vartheta_profile(dist, opt.L, 2.0);
        if (w == 0.0) continue;
        const double wt = g.weights[i] * w;
        win.m_integral += wt * d.m[i];
        win.p_integral[0] += wt * d.p[i][0];
        win.p_integral[1] += wt * d.p[i][1];
        win.e23_integral += wt * (d.e2[i] + d.e3[i]);
    }
    win.script_e = win.e23_integral * win.m_integral -
                   (win.p_integral[0] * win.p_integral[0] +
                    win.p_integral[1] * win.p_integral[1]);
    if (win.m_integral > 1e-14 * (1.0 + mass(pair))) {
        win.xi0 = {win.p_integral[0] / win.m_integral,
                   win.p_integral[1] / win.m_integral};
    }
    return win;
}

// ---------------------------------------------------------------------------
// Long-time Strichartz monitor
// ---------------------------------------------------------------------------

namespace {

std::optional<LtsRow> lts_core(const Trajectory& traj, double n, double c_star,
                               double eta, bool throw_on_envelope) {
    const std::vector<StatePair>& snaps = traj.snapshots;
    if (snaps.size() < 4) {
        throw std::runtime_error(
            "lts_monitor: at least four snapshots needed for the L2L4 quadrature");
    }
    if (!(n > 0.0) || !(c_star >= 1.0)) {
        throw std::runtime_error("lts_monitor: need n > 0 and c_star >= 1");
    }
    const SpectralPlan& plan = get_plan(snaps.front().grid);
    const Grid& g = plan.grid();
    const bool radial = (g.kind == GridKind::radial4d);
    const std::size_t ns = snaps.size();
    std::vector<double> times(ns), ncube(ns), l4u(ns), l4v(ns);
    for (std::size_t i = 0; i < ns; ++i) {
        const StatePair& s = snaps[i];
        times[i] = s.t;
        const CenterEstimates est = track_centers(s, eta);
        ncube[i] = est.n_est * est.n_est * est.n_est;
        const std::array<double, 2> cu = radial ? std::array<double, 2>{0.0, 0.0}
                                                : est.xi_est;
        const std::array<double, 2> cv =
            radial ? std::array<double, 2>{0.0, 0.0}
                   : std::array<double, 2>{2.0 * est.xi_est[0], 2.0 * est.xi_est[1]};
        const std::vector<cplx> hu = lp_project(plan, s.u, n, LpMode::gt, cu);
        const std::vector<cplx> hv = lp_project(plan, s.v, n, LpMode::gt, cv);
        double qu = 0.0, qv = 0.0;
        for (std::size_t p = 0; p < hu.size(); ++p) {
            qu += g.weights[p] * std::norm(hu[p]) * std::norm(hu[p]);
            qv += g.weights[p] * std::norm(hv[p]) * std::norm(hv[p]);
        }
        l4u[i] = std::sqrt(qu);  // |f|_{L4}^2
        l4v[i] = std::sqrt(qv);
    }
    LtsRow row;
    row.n = n;
    row.k_total = trapezoid(times, ncube);
    if (!(n <= c_star * row.k_total)) {
        if (throw_on_envelope) {
            throw std::runtime_error(
                "lts_monitor: n exceeds c_star * K; the envelope only covers "
                "n <= C* K");
        }
        return std::nullopt;
    }
    row.measured = std::sqrt(trapezoid(times, l4u)) + std::sqrt(trapezoid(times, l4v));
    row.bound = std::sqrt(row.k_total / n);
    row.ratio = (row.bound > 0.0) ? row.measured / row.bound : 0.0;
    return row;
}

}  // namespace

LtsRow lts_monitor(const Trajectory& traj, double n, double c_star, double eta) {
    return *lts_core(traj, n, c_star, eta, true);
}

std::vector<LtsRow> lts_report(const Trajectory& traj,
                               const std::vector<double>& n_values,
                               double c_star, double eta) {
    std::vector<LtsRow> rows;
    rows.reserve(n_values.size());
    for (double n : n_values) {
        // Values outside the n <= c_star K envelope are dropped from the
        // table rather than voiding the whole report.
        if (auto row = lts_core(traj, n, c_star, eta, false)) {
            rows.push_back(*row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Series assembly and CSV emission
// ---------------------------------------------------------------------------

SeriesReport assemble_report(const Trajectory& traj, const ReportOptions& opt) {
    const std::vector<StatePair>& snaps = traj.snapshots;
    const DiagnosticSeries& d = traj.diagnostics;
    if (snaps.empty() || d.time.size() != snaps.size()) {
        throw std::runtime_error(
            "assemble_report: trajectory needs aligned snapshots and diagnostics");
    }
    SeriesReport rep;
    rep.time = d.time;
    rep.mass = d.mass;
    rep.energy = d.energy;
    rep.s_accumulator = d.scatter_s;
    rep.gradient_norm = d.grad_pair;
    const bool radial = (snaps.front().grid->kind == GridKind::radial4d);
    for (const StatePair& s : snaps) {
        CenterEstimates est;
        if (mass(s) > 0.0) est = track_centers(s, opt.eta);
        rep.n_est.push_back(est.n_est);
        rep.x_est.push_back(est.x_est);
        rep.xi_est.push_back(est.xi_est);
        rep.virial.push_back(virial_momentum(s));
        rep.morawetz.push_back(
            radial ? morawetz_radial(s, std::max(est.n_est, 1e-9), opt.morawetz_l,
                                     opt.morawetz_k)
                   : 0.0);
    }
    if (rep.time.size() >= 2) {
        Partition part = characteristic_partition(rep.time, rep.s_accumulator);
        rep.boundaries = std::move(part.boundaries);
        rep.partition_note = std::move(part.note);
    }
    return rep;
}

void write_report_csv(const SeriesReport& report, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_report_csv: cannot open " + path);
    std::fputs("# characteristic_boundaries:", f);
    for (double b : report.boundaries) std::fprintf(f, " %.17g", b);
    if (!report.partition_note.empty()) {
        std::fprintf(f, " (%s)", report.partition_note.c_str());
    }
    std::fputs("\n", f);
    std::fputs(
        "time,mass,energy,s_accumulator,gradient_norm,n_est,x_est_0,x_est_1,"
        "xi_est_0,xi_est_1,virial,morawetz\n",
        f);
    for (std::size_t i = 0; i < report.time.size(); ++i) {
        std::fprintf(
            f,
            "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
            report.time[i], report.mass[i], report.energy[i], report.s_accumulator[i],
            report.gradient_norm[i], report.n_est[i], report.x_est[i][0],
            report.x_est[i][1], report.xi_est[i][0], report.xi_est[i][1],
            report.virial[i], report.morawetz[i]);
    }
    std::fclose(f);
}

void write_weight_csv(const WeightFamily& family, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_weight_csv: cannot open " + path);
    std::fprintf(f, "# L=%.17g theta_l_integral=%.17g\n", family.L,
                 family.theta_l_integral);
    std::fputs("r,theta,big_theta,vartheta,chi,theta_l,big_theta_l\n", f);
    for (std::size_t i = 0; i < family.r.size(); ++i) {
        std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", family.r[i],
                     family.theta[i], family.big_theta[i], family.vartheta[i],
                     family.chi[i], family.theta_l[i], family.big_theta_l[i]);
    }
    std::fclose(f);
}

void write_scale_csv(const FrequencyScale& scale, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_scale_csv: cannot open " + path);
    std::fprintf(f, "# c0=%.17g\n", scale.c0);
    std::fputs("t_lo,t_hi,value\n", f);
    for (std::size_t k = 0; k < scale.values.size(); ++k) {
        std::fprintf(f, "%.17g,%.17g,%.17g\n", scale.t_bounds[k],
                     scale.t_bounds[k + 1], scale.values[k]);
    }
    std::fclose(f);
}

}  // namespace mrnls
