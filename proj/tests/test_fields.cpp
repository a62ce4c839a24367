// Field-layer tests: grids, transforms, Littlewood-Paley algebra, symmetry
// action, serialization.
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <thread>
#include <vector>

#include "doctest.h"
#include "mrnls/cutoff.hpp"
#include "mrnls/grid.hpp"
#include "mrnls/random.hpp"
#include "mrnls/serialize.hpp"
#include "mrnls/spectral.hpp"
#include "mrnls/state.hpp"
#include "mrnls/symmetry.hpp"
#include "oracles/oracle_bessel.hpp"
#include "oracles/oracle_fourier.hpp"
#include "test_util.hpp"

using namespace mrnls;
using testutil::atom_field;
using testutil::max_abs;
using testutil::max_abs_diff;
using testutil::rel_l2_diff;

namespace {
constexpr double kPi = 3.14159265358979323846;

// First five positive zeros of J1, frozen from the bisection oracle.
constexpr double kJ1Zeros[5] = {3.8317059702075123, 7.0155866698156187,
                                10.173468135062722, 13.323691936314223,
                                16.470630050877633};
}  // namespace

TEST_CASE("smooth cutoff is 1 on [0,1], 0 beyond 2, and smooth in between") {
    CHECK(smooth_cutoff(0.0) == 1.0);
    CHECK(smooth_cutoff(0.7) == 1.0);
    CHECK(smooth_cutoff(1.0) == 1.0);
    CHECK(smooth_cutoff(2.0) == 0.0);
    CHECK(smooth_cutoff(2.7) == 0.0);
    const double mid = smooth_cutoff(1.5);
    CHECK(mid > 0.0);
    CHECK(mid < 1.0);
    double prev = 1.0;
    for (int i = 0; i <= 400; ++i) {
        const double s = 2.0 * i / 400.0;
        const double val = smooth_cutoff(s);
        CHECK(val <= prev + 1e-15);
        CHECK(std::abs(val - smooth_cutoff_exact(s)) < 1e-7);
        prev = val;
    }
}

TEST_CASE("radial grid nodes are scaled Bessel zeros; weights close the volume") {
    const auto g = make_grid(GridKind::radial4d, 256, 20.0, 4);
    for (int k = 0; k < 5; ++k) {
        CHECK(std::abs(oracle::bessel_j1_zero(k + 1) - kJ1Zeros[k]) < 1e-12);
    }
    const double S = oracle::bessel_j1_zero(257);
    for (int k = 0; k < 5; ++k) {
        const double expect = kJ1Zeros[k] * 20.0 / S;
        CHECK(std::abs(g.nodes[static_cast<std::size_t>(k)] - expect) <= 1e-12 * expect);
    }
    for (std::size_t k = 0; k + 1 < g.nodes.size(); ++k) {
        CHECK(g.nodes[k] > 0.0);
        CHECK(g.nodes[k + 1] > g.nodes[k]);
    }
    double wsum = 0.0, minw = 1e300;
    for (double w : g.weights) {
        wsum += w;
        minw = std::min(minw, w);
    }
    CHECK(minw > 0.0);
    const double vol = kPi * kPi * 20.0 * 20.0 * 20.0 * 20.0 / 2.0;
    CHECK(std::abs(wsum - vol) <= 1e-10 * vol);
    const double K = S / 20.0;
    double kwsum = 0.0, minkw = 1e300;
    for (double w : g.kweights) {
        kwsum += w;
        minkw = std::min(minkw, w);
    }
    CHECK(minkw > 0.0);
    const double kvol = kPi * kPi * K * K * K * K / 2.0;
    CHECK(std::abs(kwsum - kvol) <= 1e-10 * kvol);
}

TEST_CASE("cartesian grids have uniform nodes and symmetric FFT wavenumbers") {
    const auto g = make_grid(GridKind::cartesian, 64, 2.0 * kPi, 1);
    for (int i = 0; i < 64; ++i) {
        CHECK(g.nodes[static_cast<std::size_t>(i)] ==
              doctest::Approx(-kPi + i * 2.0 * kPi / 64).epsilon(1e-14));
    }
    CHECK(g.knodes[0] == 0.0);
    CHECK(g.knodes[1] == doctest::Approx(1.0));
    CHECK(g.knodes[31] == doctest::Approx(31.0));
    CHECK(g.knodes[32] == doctest::Approx(-32.0));
    CHECK(g.knodes[63] == doctest::Approx(-1.0));
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    CHECK(wsum == doctest::Approx(2.0 * kPi).epsilon(1e-12));

    const auto g2 = make_grid(GridKind::cartesian, 16, 5.0, 2);
    CHECK(g2.npoints() == 256);
    double w2 = 0.0;
    for (double w : g2.weights) w2 += w;
    CHECK(w2 == doctest::Approx(25.0).epsilon(1e-12));
    const auto c = g2.coord(3 * 16 + 7);
    CHECK(c[0] == doctest::Approx(-2.5 + 3 * 5.0 / 16));
    CHECK(c[1] == doctest::Approx(-2.5 + 7 * 5.0 / 16));
}

TEST_CASE("make_grid rejects invalid configurations") {
    CHECK_THROWS(make_grid(GridKind::cartesian, 7, 2.0 * kPi, 1));
    CHECK_THROWS(make_grid(GridKind::cartesian, 64, 10.0, 4));
    CHECK_THROWS(make_grid(GridKind::radial4d, 64, 10.0, 2));
    CHECK_THROWS(make_grid(GridKind::radial4d, 64, -1.0, 4));
    CHECK_THROWS(make_grid(GridKind::cartesian, 4, 10.0, 1));
}

TEST_CASE("transforms satisfy Plancherel and invert exactly") {
    Rng rng(20260815);
    struct Case {
        GridKind kind;
        int n;
        double extent;
        int dims;
    };
    const Case cases[] = {{GridKind::radial4d, 128, 15.0, 4},
                          {GridKind::cartesian, 256, 30.0, 1},
                          {GridKind::cartesian, 64, 20.0, 2}};
    for (const auto& c : cases) {
        auto grid = make_grid_shared(c.kind, c.n, c.extent, c.dims);
        const SpectralPlan& plan = get_plan(grid);
        std::vector<cplx> f =
            (c.kind == GridKind::radial4d)
                ? atom_field(*grid, rng, 3, 0.8, 2.0, 0.0, 0.0)
                : atom_field(*grid, rng, 3, 0.9, 1.6, c.extent / 8.0, 1.5);
        const std::vector<cplx> fhat = plan.forward(f);
        const double pn = l2sq(*grid, f);
        const double sn = spectral_l2sq(*grid, fhat);
        CHECK(std::abs(sn - pn) <= 1e-9 * pn);
        const std::vector<cplx> back = plan.inverse(fhat);
        CHECK(rel_l2_diff(*grid, back, f) <= 1e-10);

        std::vector<cplx> zero(grid->npoints(), cplx(0.0, 0.0));
        CHECK(max_abs(plan.forward(zero)) == 0.0);
        std::vector<cplx> wrong(grid->npoints() + 1);
        CHECK_THROWS(plan.forward(wrong));
    }
}

TEST_CASE("radial transform of a Gaussian matches the J1-kernel integral") {
    auto grid = make_grid_shared(GridKind::radial4d, 256, 20.0, 4);
    const SpectralPlan& plan = get_plan(grid);
    std::vector<cplx> u(grid->npoints());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double r = grid->nodes[k];
        u[k] = std::exp(-r * r / 2.0);
    }
    const std::vector<cplx> uhat = plan.forward(u);
    // The 4D unitary Fourier transform of e^{-|x|^2/2} is e^{-|xi|^2/2}.
    double num = 0.0, den = 0.0;
    for (std::size_t m = 0; m < uhat.size(); ++m) {
        const double kap = grid->knodes[m];
        const double expect = std::exp(-kap * kap / 2.0);
        num += grid->kweights[m] * std::norm(uhat[m] - expect);
        den += grid->kweights[m] * expect * expect;
        CHECK(std::abs(uhat[m].imag()) < 1e-12);
    }
    CHECK(std::sqrt(num / den) < 1e-8);
    auto gauss = [](double r) { return std::exp(-r * r / 2.0); };
    for (std::size_t m : {std::size_t(0), std::size_t(5), std::size_t(40), std::size_t(90)}) {
        const double q = oracle::radial4d_fourier(gauss, grid->knodes[m], 20.0, 1e-12);
        CHECK(std::abs(uhat[m].real() - q) < 1e-8);
    }
}

TEST_CASE("radial interpolant and its derivative are exact off the nodes") {
    auto grid = make_grid_shared(GridKind::radial4d, 256, 20.0, 4);
    const SpectralPlan& plan = get_plan(grid);
    std::vector<cplx> u(grid->npoints());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double r = grid->nodes[k];
        u[k] = std::exp(-r * r / 2.0);
    }
    const std::vector<cplx> spec = plan.forward(u);
    for (double r : {0.0, 0.17, 0.5, 1.0, 1.73, 2.9, 5.3, 9.0}) {
        const double f = std::exp(-r * r / 2.0);
        CHECK(std::abs(plan.eval_interpolant(spec, r) - f) < 1e-10);
        CHECK(std::abs(plan.eval_interpolant_derivative(spec, r) - (-r * f)) < 1e-10);
    }
    // Beyond the represented ball both evaluators report the decayed field.
    CHECK(plan.eval_interpolant(spec, 21.0) == cplx(0.0, 0.0));
    CHECK(plan.eval_interpolant_derivative(spec, 21.0) == cplx(0.0, 0.0));
    CHECK_THROWS_AS(plan.eval_interpolant_derivative({cplx(0.0, 0.0)}, 1.0),
                    std::runtime_error);
}

TEST_CASE("plane wave occupies a single spectral bin") {
    auto grid = make_grid_shared(GridKind::cartesian, 64, 2.0 * kPi, 1);
    const SpectralPlan& plan = get_plan(grid);
    std::vector<cplx> u(grid->npoints());
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = std::polar(1.0, 5.0 * grid->nodes[i]);
    }
    const std::vector<cplx> uhat = plan.forward(u);
    for (std::size_t j = 0; j < uhat.size(); ++j) {
        if (grid->knodes[j] == 5.0) {
            CHECK(std::abs(uhat[j] - std::sqrt(2.0 * kPi)) < 1e-12);
        } else {
            CHECK(std::abs(uhat[j]) < 1e-12);
        }
    }
}

TEST_CASE("Littlewood-Paley projections obey the partition and nesting algebra") {
    Rng rng(7);
    auto grid = make_grid_shared(GridKind::cartesian, 64, 2.0 * kPi, 1);
    const SpectralPlan& plan = get_plan(grid);
    std::vector<cplx> f(grid->npoints());
    for (auto& z : f) z = rng.cnormal();
    const double scale = max_abs(f);

    SUBCASE("le plus gt is the identity") {
        auto lo = lp_project(plan, f, 8.0, LpMode::le);
        auto hi = lp_project(plan, f, 8.0, LpMode::gt);
        for (std::size_t i = 0; i < f.size(); ++i) {
            CHECK(std::abs(lo[i] + hi[i] - f[i]) <= 1e-12 * scale);
        }
        auto lt = lp_project(plan, f, 8.0, LpMode::lt);
        auto ge = lp_project(plan, f, 8.0, LpMode::ge);
        for (std::size_t i = 0; i < f.size(); ++i) {
            CHECK(std::abs(lt[i] + ge[i] - f[i]) <= 1e-12 * scale);
        }
    }
    SUBCASE("eq equals the difference of consecutive le projections") {
        auto band = lp_project(plan, f, 8.0, LpMode::eq);
        auto le8 = lp_project(plan, f, 8.0, LpMode::le);
        auto le4 = lp_project(plan, f, 4.0, LpMode::le);
        for (std::size_t i = 0; i < f.size(); ++i) {
            CHECK(std::abs(band[i] - (le8[i] - le4[i])) <= 1e-12 * scale);
        }
        auto lt8 = lp_project(plan, f, 8.0, LpMode::lt);
        CHECK(max_abs_diff(lt8, le4) <= 1e-13 * scale);
    }
    SUBCASE("nested le projections compose to the smaller cutoff") {
        auto le2 = lp_project(plan, f, 2.0, LpMode::le);
        auto nested = lp_project(plan, lp_project(plan, f, 8.0, LpMode::le), 2.0, LpMode::le);
        CHECK(max_abs_diff(nested, le2) <= 1e-12 * scale);
        auto other = lp_project(plan, lp_project(plan, f, 2.0, LpMode::le), 8.0, LpMode::le);
        CHECK(max_abs_diff(other, le2) <= 1e-12 * scale);
    }
    SUBCASE("projections commute") {
        auto a = lp_project(plan, lp_project(plan, f, 4.0, LpMode::gt), 8.0, LpMode::le);
        auto b = lp_project(plan, lp_project(plan, f, 8.0, LpMode::le), 4.0, LpMode::gt);
        CHECK(max_abs_diff(a, b) <= 1e-12 * scale);
    }
    SUBCASE("band-limited functions pass through le unchanged") {
        auto flow = lp_project(plan, f, 2.0, LpMode::le);  // spectrum inside |xi| <= 4
        auto again = lp_project(plan, flow, 8.0, LpMode::le);
        CHECK(max_abs_diff(again, flow) <= 1e-12 * scale);
    }
    SUBCASE("products of low projections have no high output") {
        std::vector<cplx> g2(grid->npoints());
        for (auto& z : g2) z = rng.cnormal();
        auto lf = lp_project(plan, f, 2.0, LpMode::le);   // N/4 with N = 8
        auto lg = lp_project(plan, g2, 2.0, LpMode::le);
        std::vector<cplx> prod(grid->npoints());
        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = lf[i] * lg[i];
        auto high = lp_project(plan, prod, 8.0, LpMode::gt);
        CHECK(max_abs(high) <= 1e-11 * std::max(1.0, max_abs(prod)));
    }
    SUBCASE("frequency centers are rejected on radial grids") {
        auto rgrid = make_grid_shared(GridKind::radial4d, 64, 10.0, 4);
        const SpectralPlan& rplan = get_plan(rgrid);
        std::vector<cplx> rf(rgrid->npoints(), cplx(1.0, 0.0));
        CHECK_THROWS(lp_project(rplan, rf, 2.0, LpMode::le, {1.0, 0.0}));
        CHECK_NOTHROW(lp_project(rplan, rf, 2.0, LpMode::le));
    }
}

TEST_CASE("apply_symmetry preserves mass and matches the explicit action") {
    Rng rng(99);
    SUBCASE("identity element acts as the identity") {
        auto grid = make_grid_shared(GridKind::cartesian, 64, 20.0, 2);
        StatePair pair = make_state(grid, 0.5);
        pair.u = atom_field(*grid, rng, 2, 0.9, 1.4, 2.0, 1.0);
        pair.v = atom_field(*grid, rng, 2, 0.9, 1.4, 2.0, 1.0);
        const StatePair out = apply_symmetry(SymmetryElement{}, pair);
        CHECK(max_abs_diff(out.u, pair.u) == 0.0);
        CHECK(max_abs_diff(out.v, pair.v) == 0.0);
    }
    SUBCASE("random elements preserve mass on cartesian grids") {
        auto grid = make_grid_shared(GridKind::cartesian, 512, 48.0, 1);
        for (int trial = 0; trial < 5; ++trial) {
            StatePair pair = make_state(grid, 0.5);
            pair.u = atom_field(*grid, rng, 3, 0.7, 1.2, 3.0, 2.0);
            pair.v = atom_field(*grid, rng, 3, 0.7, 1.2, 3.0, 2.0);
            SymmetryElement g;
            g.theta = rng.uniform(0.0, 2.0 * kPi);
            g.xi0 = {rng.uniform(-1.5, 1.5), 0.0};
            g.x0 = {rng.uniform(-1.0, 1.0), 0.0};
            g.lambda = rng.uniform(0.8, 1.25);
            const double m0 = l2sq(*grid, pair.u) + l2sq(*grid, pair.v);
            const StatePair out = apply_symmetry(g, pair);
            const double m1 = l2sq(*grid, out.u) + l2sq(*grid, out.v);
            CHECK(std::abs(m1 - m0) <= 1e-10 * m0);
        }
    }
    SUBCASE("random phase and scaling preserve mass on radial grids") {
        auto grid = make_grid_shared(GridKind::radial4d, 128, 15.0, 4);
        for (int trial = 0; trial < 4; ++trial) {
            StatePair pair = make_state(grid, 0.5);
            pair.u = atom_field(*grid, rng, 2, 0.8, 1.6, 0.0, 0.0);
            pair.v = atom_field(*grid, rng, 2, 0.8, 1.6, 0.0, 0.0);
            SymmetryElement g;
            g.theta = rng.uniform(0.0, 2.0 * kPi);
            g.lambda = rng.uniform(0.7, 1.5);
            const double m0 = l2sq(*grid, pair.u) + l2sq(*grid, pair.v);
            const StatePair out = apply_symmetry(g, pair);
            const double m1 = l2sq(*grid, out.u) + l2sq(*grid, out.v);
            CHECK(std::abs(m1 - m0) <= 1e-10 * m0);
        }
    }
    SUBCASE("v acquires the phase theta over kappa") {
        auto grid = make_grid_shared(GridKind::radial4d, 64, 10.0, 4);
        StatePair pair = make_state(grid, 0.5);
        pair.u = atom_field(*grid, rng, 1, 1.0, 1.5, 0.0, 0.0);
        pair.v = atom_field(*grid, rng, 1, 1.0, 1.5, 0.0, 0.0);
        SymmetryElement g;
        g.theta = kPi;
        const StatePair out = apply_symmetry(g, pair);
        for (std::size_t i = 0; i < pair.u.size(); ++i) {
            CHECK(std::abs(out.u[i] + pair.u[i]) < 1e-14);  // e^{i pi} = -1
            CHECK(std::abs(out.v[i] - pair.v[i]) < 1e-14);  // e^{2 pi i} = 1
        }
    }
    SUBCASE("shifts are rejected on radial grids") {
        auto grid = make_grid_shared(GridKind::radial4d, 64, 10.0, 4);
        StatePair pair = make_state(grid, 0.5);
        SymmetryElement g;
        g.xi0 = {1.0, 0.0};
        CHECK_THROWS(apply_symmetry(g, pair));
    }
}

TEST_CASE("the transform intertwines the group action as on the dual side") {
    Rng rng(1234);
    const int n = 512;
    const double L = 48.0;
    auto grid = make_grid_shared(GridKind::cartesian, n, L, 1);
    const SpectralPlan& plan = get_plan(grid);
    const double dxi = 2.0 * kPi / L;
    auto dual = make_grid_shared(GridKind::cartesian, n, n * dxi, 1);

    auto fftshift = [&](const std::vector<cplx>& a) {
        std::vector<cplx> out(a.size());
        for (int l = 0; l < n; ++l) {
            out[static_cast<std::size_t>(l)] = a[static_cast<std::size_t>((l + n / 2) % n)];
        }
        return out;
    };

    const double lambdas[] = {1.0, 2.0, 0.5};
    for (int trial = 0; trial < 6; ++trial) {
        StatePair pair = make_state(grid, 0.5);
        pair.u = atom_field(*grid, rng, 4, 0.7, 1.2, 3.0, 2.0);
        SymmetryElement g;
        g.theta = rng.uniform(0.0, 2.0 * kPi);
        g.xi0 = {rng.uniform(-1.5, 1.5), 0.0};
        g.x0 = {rng.uniform(-1.0, 1.0), 0.0};
        g.lambda = lambdas[trial % 3];

        const std::vector<cplx> lhs = plan.forward(apply_symmetry(g, pair).u);

        StatePair dual_pair = make_state(dual, 0.5);
        dual_pair.u = fftshift(plan.forward(pair.u));
        SymmetryElement gd;
        gd.theta = g.theta + g.xi0[0] * g.x0[0];
        gd.xi0 = {-g.x0[0], 0.0};
        gd.x0 = {g.xi0[0], 0.0};
        gd.lambda = 1.0 / g.lambda;
        const std::vector<cplx> rhs = fftshift(apply_symmetry(gd, dual_pair).u);

        CHECK(max_abs_diff(lhs, rhs) <= 1e-8 * std::max(1.0, max_abs(lhs)));
    }
}

TEST_CASE("galilean boost applies the doubled phases and inverts") {
    Rng rng(55);
    auto grid = make_grid_shared(GridKind::cartesian, 64, 20.0, 2);
    StatePair pair = make_state(grid, 0.5);
    pair.u = atom_field(*grid, rng, 2, 0.9, 1.3, 2.0, 1.0);
    pair.v = atom_field(*grid, rng, 2, 0.9, 1.3, 2.0, 1.0);
    const std::array<double, 2> xi{0.7, -0.3};

    SUBCASE("at t=0 the channels gain e^{i x xi} and e^{2 i x xi}") {
        const StatePair out = galilean_boost(pair, xi, 0.0);
        double worst = 0.0;
        for (std::size_t i = 0; i < pair.u.size(); ++i) {
            const auto x = grid->coord(i);
            const double ph = x[0] * xi[0] + x[1] * xi[1];
            worst = std::max(worst, std::abs(out.u[i] - pair.u[i] * std::polar(1.0, ph)));
            worst = std::max(worst, std::abs(out.v[i] - pair.v[i] * std::polar(1.0, 2.0 * ph)));
        }
        CHECK(worst < 1e-11);
        CHECK(out.t == pair.t);
    }
    SUBCASE("boost followed by the opposite boost is the identity") {
        const StatePair once = galilean_boost(pair, xi, 0.4);
        const double m0 = l2sq(*grid, pair.u) + l2sq(*grid, pair.v);
        const double m1 = l2sq(*grid, once.u) + l2sq(*grid, once.v);
        CHECK(std::abs(m1 - m0) <= 1e-10 * m0);
        const StatePair back = galilean_boost(once, {-xi[0], -xi[1]}, 0.4);
        CHECK(max_abs_diff(back.u, pair.u) <= 1e-10 * std::max(1.0, max_abs(pair.u)));
        CHECK(max_abs_diff(back.v, pair.v) <= 1e-10 * std::max(1.0, max_abs(pair.v)));
    }
    SUBCASE("radial grids are rejected") {
        auto rgrid = make_grid_shared(GridKind::radial4d, 64, 10.0, 4);
        StatePair rp = make_state(rgrid, 0.5);
        CHECK_THROWS(galilean_boost(rp, xi, 0.1));
    }
}

TEST_CASE("scaling transform: mass in d=4, critical norm in d=2, time stamp") {
    SUBCASE("mass is invariant on the radial grid") {
        auto grid = make_grid_shared(GridKind::radial4d, 256, 20.0, 4);
        StatePair pair = make_state(grid, 0.5);
        for (std::size_t k = 0; k < pair.u.size(); ++k) {
            const double r = grid->nodes[k];
            pair.u[k] = std::exp(-r * r / 2.0);
            pair.v[k] = 0.5 * std::exp(-r * r / (2.0 * 1.3 * 1.3));
        }
        pair.t = 0.3;
        const double m0 = l2sq(*grid, pair.u) + l2sq(*grid, pair.v);
        const StatePair out = scaling_transform(pair, 2.0);
        const double m1 = l2sq(*grid, out.u) + l2sq(*grid, out.v);
        CHECK(std::abs(m1 - m0) <= 1e-6 * m0);
        CHECK(out.t == doctest::Approx(4.0 * 0.3).epsilon(1e-14));
        (void)take_resolution_warning();
    }
    SUBCASE("lambda = 1 is the identity") {
        auto grid = make_grid_shared(GridKind::radial4d, 64, 10.0, 4);
        Rng rng(3);
        StatePair pair = make_state(grid, 0.5);
        pair.u = atom_field(*grid, rng, 2, 0.9, 1.4, 0.0, 0.0);
        const StatePair out = scaling_transform(pair, 1.0);
        CHECK(max_abs_diff(out.u, pair.u) == 0.0);
    }
    SUBCASE("the s_c = -1 seminorm is invariant in d = 2") {
        // Data built as a smooth spectral annulus away from xi = 0, so the
        // |xi|^{-2} weight stays smooth and both lattice sums converge.
        auto grid = make_grid_shared(GridKind::cartesian, 256, 48.0, 2);
        const SpectralPlan& plan = get_plan(grid);
        StatePair pair = make_state(grid, 0.5);
        std::vector<cplx> fhat(grid->npoints());
        for (std::size_t j = 0; j < fhat.size(); ++j) {
            const auto k = grid->wavenumber(j);
            const double kk = std::hypot(k[0], k[1]);
            const double bump = std::exp(-(kk - 2.5) * (kk - 2.5) / (2.0 * 0.5 * 0.5));
            fhat[j] = bump * (1.0 + 0.2 * std::sin(k[0]) + 0.1 * std::cos(k[1]));
        }
        pair.u = plan.inverse(fhat);
        const double before = sobolev_dot_sq(plan, pair.u, -1.0);
        const StatePair out = scaling_transform(pair, 2.0);
        const double after = sobolev_dot_sq(plan, out.u, -1.0);
        CHECK(std::abs(after - before) <= 1e-6 * before);
    }
    SUBCASE("a scaling that crowds the boundary raises a resolution warning") {
        auto grid = make_grid_shared(GridKind::radial4d, 128, 15.0, 4);
        StatePair pair = make_state(grid, 0.5);
        for (std::size_t k = 0; k < pair.u.size(); ++k) {
            const double r = grid->nodes[k];
            pair.u[k] = std::exp(-r * r / (2.0 * 16.0));
        }
        (void)take_resolution_warning();
        (void)scaling_transform(pair, 4.0);
        CHECK(!take_resolution_warning().empty());
        for (std::size_t k = 0; k < pair.u.size(); ++k) {
            const double r = grid->nodes[k];
            pair.u[k] = std::exp(-r * r / 2.0);
        }
        (void)scaling_transform(pair, 1.2);
        CHECK(take_resolution_warning().empty());
    }
}

TEST_CASE("states round trip through the binary container and export csv") {
    Rng rng(42);
    auto grid = make_grid_shared(GridKind::radial4d, 64, 10.0, 4);
    StatePair pair = make_state(grid, 0.25);
    pair.u = atom_field(*grid, rng, 2, 0.9, 1.5, 0.0, 0.0);
    pair.v = atom_field(*grid, rng, 2, 0.9, 1.5, 0.0, 0.0);
    pair.t = 1.75;

    const std::string bin = "test_fields_state.mrnls";
    save_state(pair, bin);
    const StatePair loaded = load_state(bin);
    CHECK(loaded.grid->kind == pair.grid->kind);
    CHECK(loaded.grid->n == pair.grid->n);
    CHECK(loaded.grid->extent == pair.grid->extent);
    CHECK(loaded.t == pair.t);
    CHECK(loaded.kappa == pair.kappa);
    CHECK(max_abs_diff(loaded.u, pair.u) == 0.0);
    CHECK(max_abs_diff(loaded.v, pair.v) == 0.0);
    std::remove(bin.c_str());

    const std::string csv = "test_fields_state.csv";
    write_state_csv(pair, csv);
    std::ifstream is(csv);
    REQUIRE(is.good());
    std::string line;
    std::getline(is, line);
    CHECK(line == "r,re_u,im_u,re_v,im_v");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == grid->npoints());
    is.close();
    std::remove(csv.c_str());

    CHECK_THROWS(load_state("no_such_file.mrnls"));
}

TEST_CASE("state validation rejects malformed pairs") {
    auto grid = make_grid_shared(GridKind::radial4d, 64, 10.0, 4);
    CHECK_THROWS(make_state(grid, -1.0));
    StatePair pair = make_state(grid, 0.5);
    pair.u.resize(10);
    CHECK_THROWS(check_pair(pair));
    pair = make_state(grid, 0.5);
    pair.v[3] = cplx(std::nan(""), 0.0);
    CHECK_THROWS(check_pair(pair));
}

TEST_CASE("plans serve concurrent readers") {
    auto grid = make_grid_shared(GridKind::cartesian, 64, 20.0, 2);
    const SpectralPlan& plan = get_plan(grid);
    Rng rng(8);
    const std::vector<cplx> f = atom_field(*grid, rng, 2, 0.9, 1.4, 2.0, 1.0);
    std::vector<cplx> a, b;
    std::thread ta([&] { a = plan.forward(f); });
    std::thread tb([&] { b = plan.forward(f); });
    ta.join();
    tb.join();
    CHECK(max_abs_diff(a, b) == 0.0);
}
