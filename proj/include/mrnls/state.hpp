// StatePair: a complex field pair (u, v) on a shared grid with a time stamp
// and the coupling parameter kappa. Also weighted norms and Littlewood-Paley
// projections.
#pragma once

#include <array>
#include <memory>
#include <vector>

#include "mrnls/grid.hpp"
#include "mrnls/spectral.hpp"

namespace mrnls {

struct StatePair {
    std::shared_ptr<const Grid> grid;
    std::vector<cplx> u;
    std::vector<cplx> v;
    double t = 0.0;
    double kappa = 0.5;
};

StatePair make_state(std::shared_ptr<const Grid> grid, double kappa);

// Throws if u/v sizes disagree with the grid, kappa <= 0, or values are not
// finite.
void check_pair(const StatePair& pair);

// integral |f|^2 dx with the grid's physical quadrature weights.
double l2sq(const Grid& g, const std::vector<cplx>& f);
// integral |f_hat|^2 dxi with the spectral weights.
double spectral_l2sq(const Grid& g, const std::vector<cplx>& fhat);
// integral |grad f|^2 dx, computed spectrally.
double grad_l2sq(const SpectralPlan& plan, const std::vector<cplx>& f);
// Homogeneous Sobolev seminorm squared sum_k W_k |k|^{2s} |f_hat_k|^2; for
// s < 0 the zero-frequency bin is skipped.
double sobolev_dot_sq(const SpectralPlan& plan, const std::vector<cplx>& f, double s);

// Littlewood-Paley projections with the smooth cutoff theta (1 on [0,1],
// supported in [0,2]): le is theta(|xi - c|/N), gt is its exact complement,
// eq is theta(|.|/N) - theta(|.|/(N/2)), lt equals le at N/2, ge is the exact
// complement of lt.
enum class LpMode { le, eq, gt, ge, lt };

std::vector<cplx> lp_project(const SpectralPlan& plan, const std::vector<cplx>& field,
                             double N, LpMode mode,
                             std::array<double, 2> center = {0.0, 0.0});
StatePair lp_project(const StatePair& pair, double N, LpMode mode,
                     std::array<double, 2> center = {0.0, 0.0});

}  // namespace mrnls
