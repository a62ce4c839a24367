// Grid construction. The 4D-radial grid collocates on scaled zeros of J1,
// matching the discrete Hankel transform of order 1; quadrature weights come
// from the Fourier-Bessel Parseval relation with a closure correction near the
// outer boundary so the weights sum exactly to the ball volume pi^2 R^4 / 2.
// The Cartesian grid is a uniform periodic box centred at the origin with
// wavenumbers stored in FFT order.

#include "mrnls/grid.hpp"

#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mrnls {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Rescale the weights on nodes with |x| > frac * extent by a common factor so
// the total equals target. Falls back to a global rescale if the tail cannot
// absorb the deficit while staying positive.
void close_weights(std::vector<double>& w, const std::vector<double>& nodes,
                   double extent, double frac, double target) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    const double deficit = target - total;
    double tail = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (nodes[k] > frac * extent) tail += w[k];
    }
    const double factor = (tail > 0.0) ? 1.0 + deficit / tail : 0.0;
    if (tail > 0.0 && factor > 0.0) {
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (nodes[k] > frac * extent) w[k] *= factor;
        }
    } else {
        const double global = target / total;
        for (double& x : w) x *= global;
    }
}

}  // namespace

std::size_t Grid::npoints() const {
    std::size_t p = 1;
    const int axes = (kind == GridKind::radial4d) ? 1 : dims;
    for (int a = 0; a < axes; ++a) p *= static_cast<std::size_t>(n);
    return p;
}

double Grid::volume() const {
    if (kind == GridKind::radial4d) {
        const double R = extent;
        const double pi = 4.0 * std::atan(1.0);
        return pi * pi * R * R * R * R / 2.0;
    }
    double v = 1.0;
    for (int a = 0; a < dims; ++a) v *= extent;
    return v;
}

double Grid::spacing() const {
    return extent / static_cast<double>(n);
}

std::array<double, 2> Grid::coord(std::size_t i) const {
    if (kind == GridKind::radial4d || dims == 1) return {nodes[i], 0.0};
    const std::size_t ix = i / static_cast<std::size_t>(n);
    const std::size_t iy = i % static_cast<std::size_t>(n);
    return {nodes[ix], nodes[iy]};
}

std::array<double, 2> Grid::wavenumber(std::size_t i) const {
    if (kind == GridKind::radial4d || dims == 1) return {knodes[i], 0.0};
    const std::size_t ix = i / static_cast<std::size_t>(n);
    const std::size_t iy = i % static_cast<std::size_t>(n);
    return {knodes[ix], knodes[iy]};
}

double Grid::wavenumber_mag(std::size_t i) const {
    const auto k = wavenumber(i);
    if (kind == GridKind::radial4d || dims == 1) return std::abs(k[0]);
    return std::hypot(k[0], k[1]);
}

Grid make_grid(GridKind kind, int n, double extent, int dims) {
    if (!(extent > 0.0)) {
        throw std::runtime_error("make_grid: extent must be positive, got " +
                                 std::to_string(extent));
    }
    if (n < 8) {
        throw std::runtime_error("make_grid: need at least 8 points per axis, got " +
                                 std::to_string(n));
    }

    Grid g;
    g.kind = kind;
    g.n = n;
    g.extent = extent;
    g.dims = dims;

    const double pi = 4.0 * std::atan(1.0);

    if (kind == GridKind::radial4d) {
        if (dims != 4) {
            throw std::runtime_error("make_grid: radial4d grid requires dims=4, got " +
                                     std::to_string(dims));
        }
        const double R = extent;
        std::vector<double> jz(static_cast<std::size_t>(n) + 1);
        for (int k = 1; k <= n + 1; ++k) {
            jz[static_cast<std::size_t>(k - 1)] = gsl_sf_bessel_zero_J1(static_cast<unsigned>(k));
        }
        const double S = jz[static_cast<std::size_t>(n)];
        const double K = S / R;

        g.nodes.resize(static_cast<std::size_t>(n));
        g.knodes.resize(static_cast<std::size_t>(n));
        g.weights.resize(static_cast<std::size_t>(n));
        g.kweights.resize(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            const double j = jz[static_cast<std::size_t>(k)];
            const double J2 = gsl_sf_bessel_Jn(2, j);
            const double r = j * R / S;
            const double kap = j / R;
            g.nodes[static_cast<std::size_t>(k)] = r;
            g.knodes[static_cast<std::size_t>(k)] = kap;
            // Weight of the k-th radius in the 4D radial quadrature
            // integral f dx ~ sum_k W_k f(r_k), from the Fourier-Bessel
            // Parseval relation: W_k = 4 pi^2 R^2 r_k^2 / (S^2 J2(j_k)^2).
            g.weights[static_cast<std::size_t>(k)] =
                4.0 * pi * pi * R * R * r * r / (S * S * J2 * J2);
            g.kweights[static_cast<std::size_t>(k)] =
                4.0 * pi * pi * K * K * kap * kap / (S * S * J2 * J2);
        }
        // The raw Parseval weights integrate band-limited functions, not the
        // constant 1; their sum falls short of the ball volume by O(1/n).
        // Close the gap on the outer 10% of radii, where fields are required
        // to be negligible anyway.
        close_weights(g.weights, g.nodes, R, 0.9, pi * pi * R * R * R * R / 2.0);
        close_weights(g.kweights, g.knodes, K, 0.9, pi * pi * K * K * K * K / 2.0);
        return g;
    }

    // cartesian
    if (dims != 1 && dims != 2) {
        throw std::runtime_error("make_grid: cartesian grid supports dims=1 or 2, got " +
                                 std::to_string(dims));
    }
    if (!is_power_of_two(n)) {
        throw std::runtime_error("make_grid: cartesian grid needs n a power of two, got " +
                                 std::to_string(n));
    }
    const double L = extent;
    const double h = L / n;
    const double dxi = 2.0 * pi / L;
    g.nodes.resize(static_cast<std::size_t>(n));
    g.knodes.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        g.nodes[static_cast<std::size_t>(i)] = -L / 2.0 + i * h;
        const int j = (i <= n / 2 - 1) ? i : i - n;  // FFT frequency order
        g.knodes[static_cast<std::size_t>(i)] = dxi * j;
    }
    const std::size_t np = g.npoints();
    double wcell = 1.0, kcell = 1.0;
    for (int a = 0; a < dims; ++a) {
        wcell *= h;
        kcell *= dxi;
    }
    g.weights.assign(np, wcell);
    g.kweights.assign(np, kcell);
    return g;
}

std::shared_ptr<const Grid> make_grid_shared(GridKind kind, int n, double extent, int dims) {
    return std::make_shared<const Grid>(make_grid(kind, n, extent, dims));
}

bool same_grid(const Grid& a, const Grid& b) {
    return a.kind == b.kind && a.n == b.n && a.extent == b.extent && a.dims == b.dims;
}

}  // namespace mrnls
