// Grids: 4D-radial Bessel-zero collocation or periodic Cartesian in 1-2
// dimensions, with collocation nodes and quadrature weights on both the
// physical and the spectral side.
#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace mrnls {

enum class GridKind { radial4d, cartesian };

struct Grid {
    GridKind kind = GridKind::radial4d;
    int n = 0;          // points per axis
    double extent = 0;  // R_max (radial) or box length (cartesian)
    int dims = 4;       // 4 for radial4d, 1 or 2 for cartesian

    // Per-axis collocation data. radial4d: nodes = radii r_k, knodes = kappa_m.
    // cartesian: nodes = x_i in [-extent/2, extent/2), knodes in FFT order.
    std::vector<double> nodes;
    std::vector<double> knodes;

    // Per-degree-of-freedom quadrature weights over the full domain (physical
    // side) and over frequency space (spectral side). Size equals npoints().
    std::vector<double> weights;
    std::vector<double> kweights;

    std::size_t npoints() const;
    double volume() const;
    double spacing() const;  // cartesian node spacing; radial: mean spacing

    // Coordinate / wavenumber of a degree of freedom. For cartesian d=2 the
    // layout is row-major with the second axis fastest (FFTW convention);
    // radial grids report (r, 0).
    std::array<double, 2> coord(std::size_t i) const;
    std::array<double, 2> wavenumber(std::size_t i) const;
    double wavenumber_mag(std::size_t i) const;
};

Grid make_grid(GridKind kind, int n, double extent, int dims);
std::shared_ptr<const Grid> make_grid_shared(GridKind kind, int n, double extent, int dims);

bool same_grid(const Grid& a, const Grid& b);

}  // namespace mrnls
