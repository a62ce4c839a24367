// Spectral transforms tied to a Grid.
//
// radial4d: a quasi-discrete Hankel transform of order 1 on the Bessel-zero
// nodes realizes the 4D radial Fourier transform
//     u_hat(k) = (1/k) * integral_0^inf u(r) J1(k r) r^2 dr.
// The transform matrix is the orthogonal polar factor of the weighted QDHT
// kernel, so the discrete map is exactly unitary between the weighted L^2
// spaces of the grid: Plancherel and the round trip hold to rounding error
// for every field, while spectral accuracy for resolved fields is kept.
//
// cartesian: unitary FFT with the continuum normalization
//     u_hat(xi_j) = (2 pi)^{-d/2} h^d (-1)^{j} DFT_j[u],
//     u(x_i)      = (2 pi)^{-d/2} dxi^d IDFT_i[(-1)^{j} u_hat],
// where the (-1)^j per-axis parity accounts for the box being centred at the
// origin. The Laplacian acts diagonally as -|k|^2 on the spectral side.
#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "mrnls/grid.hpp"

namespace mrnls {

using cplx = std::complex<double>;

class SpectralPlan {
  public:
    explicit SpectralPlan(std::shared_ptr<const Grid> grid);
    ~SpectralPlan();
    SpectralPlan(const SpectralPlan&) = delete;
    SpectralPlan& operator=(const SpectralPlan&) = delete;

    const Grid& grid() const { return *grid_; }
    const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }

    void forward(const cplx* in, cplx* out) const;
    void inverse(const cplx* in, cplx* out) const;
    std::vector<cplx> forward(const std::vector<cplx>& field) const;
    std::vector<cplx> inverse(const std::vector<cplx>& field) const;

    // -|k|^2 per spectral degree of freedom.
    const std::vector<double>& laplacian_symbol() const { return lap_; }

    // Radial grids only: evaluate the Fourier-Bessel interpolant of a
    // spectral field at an arbitrary radius r >= 0 (zero beyond the grid
    // radius, where the series no longer represents the field).
    cplx eval_interpolant(const std::vector<cplx>& spec, double r) const;

    // Radial grids only: d/dr of the same interpolant at an arbitrary radius
    // (zero at r = 0 and beyond the grid radius).
    cplx eval_interpolant_derivative(const std::vector<cplx>& spec, double r) const;

    // Radial grids only: d/dr at the collocation radii, from spectral data.
    void radial_derivative_from_spectral(const std::vector<cplx>& spec,
                                         std::vector<cplx>& ddr) const;
    std::vector<cplx> radial_derivative(const std::vector<cplx>& phys) const;

  private:
    struct Impl;
    std::shared_ptr<const Grid> grid_;
    std::vector<double> lap_;
    std::unique_ptr<Impl> impl_;
};

// Process-wide plan cache; returned reference stays valid for the program
// lifetime. Plans are immutable and safe for concurrent use.
const SpectralPlan& get_plan(const std::shared_ptr<const Grid>& grid);

// Evaluate the trigonometric interpolant with FFT-ordered coefficients
// (wavenumbers dxi * {0,..,n/2-1,-n/2,..,-1}) at the n points y_m = a + m*step
// via a chirp-z (Bluestein) transform; exact for band-limited data. coef has
// length n, a power of two.
std::vector<cplx> trig_eval_progression(const std::vector<cplx>& coef, double dxi,
                                        double a, double step);

}  // namespace mrnls
