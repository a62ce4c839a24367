// Time evolution of the coupled pair
//   i du/dt + Lap u = conj(u) v
//   i dv/dt + kappa Lap v = u^2
// by Strang splitting: the linear flow is exact in the spectral basis, the
// pointwise nonlinear flow is advanced by a classical fourth-order step.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mrnls/state.hpp"

namespace mrnls {

enum class AdaptMode { fixed, mass_drift_adaptive };
enum class Verdict { scattered, blewup, inconclusive };

const char* to_string(Verdict v);
const char* to_string(AdaptMode m);

struct EvolveOptions {
    double dt = 1e-3;
    double t_end = 1.0;
    AdaptMode adapt = AdaptMode::fixed;
    // Diagnostics are recorded (and guards checked) every record_every steps.
    int record_every = 100;
    // Declare blow-up when |grad u| exceeds this factor times its initial value.
    double blowup_gradient_factor = 10.0;
    // Declare scattering when the scattering-size increment per unit time over
    // the final fifth of the horizon stays below this threshold.
    double scatter_tail_epsilon = 1e-4;
};

struct DiagnosticSeries {
    std::vector<double> time;
    std::vector<double> mass;
    std::vector<double> energy;
    std::vector<double> grad_u;          // |grad u|
    std::vector<double> grad_pair;       // sqrt(|grad u|^2 + |grad v|^2)
    std::vector<double> scatter_s;       // running integral of (|u|^3+|v|^3)
    std::vector<double> boundary_frac;   // radial grids; 0 on cartesian
};

struct Trajectory {
    std::vector<StatePair> snapshots;    // recorded states, time ordered
    DiagnosticSeries diagnostics;
    Verdict verdict = Verdict::inconclusive;
    double mass_drift = 0.0;    // max |M(t)-M(0)| / max(M(0), tiny)
    double energy_drift = 0.0;  // max |E(t)-E(0)| / (1 + |E(0)|)
    bool boundary_ok = true;    // radial runs: tail mass fraction stayed small
    std::string note;
};

// Exact free flow for time t: multiplies the u spectrum by exp(-i t |k|^2)
// and the v spectrum by exp(-i t kappa |k|^2).
StatePair free_propagate(const StatePair& pair, double t);

// One fourth-order step of the pointwise system
//   i u' = conj(u) v,   i v' = u^2
// with the spatial point frozen.  |u|^2 + |v|^2 is conserved by the exact
// flow; the step preserves it to its local truncation order.
std::pair<cplx, cplx> nonlinear_substep(cplx u, cplx v, double dt);

// One Strang step: half linear, full nonlinear, half linear.
StatePair step(const StatePair& pair, double dt);

Trajectory evolve(const StatePair& pair, const EvolveOptions& opts);

// Discrete space-time residual of the pair system with dispersion kappa_test
// in the v equation.  Time derivatives by central differences across the
// recorded snapshots (at least three required), space derivatives spectral.
double pde_residual(const Trajectory& traj, double kappa_test);

// L^2_{t,x}([0,T] x box) norm of the product of two free waves
//   exp(i t theta1 Lap) phi * exp(i t theta2 Lap) psi
// for band-limited spectra, with the time integral done in closed form.
double bilinear_pair_norm(const std::shared_ptr<const Grid>& grid,
                          const std::vector<cplx>& phi_hat,
                          const std::vector<cplx>& psi_hat,
                          double theta1, double theta2, double time_window);

// Worst ratio |fg| / (M^{3/2} N^{-1/2} |phi| |psi|) over random draws of
// band-limited wave packets with phi supported in {|k| < M} and psi in
// {N < |k| <= 1.1 N}.  Requires a two-dimensional cartesian grid and
// M <= N/4.  The default window sits inside the first box transit of the
// fast packet, where the periodic grid mimics free space.
double bilinear_strichartz_ratio(const std::shared_ptr<const Grid>& grid,
                                 double freq_m, double freq_n,
                                 double theta1, double theta2,
                                 int trials, std::uint64_t seed,
                                 double time_window = 0.15);

// Space-time norm ratio |exp(i t Lap) u0|_{L^q_t L^r_x([0,T])} / |u0|_{L^2}
// for an admissible exponent pair: 2/q = d (1/2 - 1/r), q, r >= 2.
double strichartz_audit(const std::shared_ptr<const Grid>& grid,
                        const std::vector<cplx>& u0, double q, double r,
                        double time_window = 1.0, int time_samples = 129);

// Diagnostics table as CSV (one row per record time).
void write_diagnostics_csv(const Trajectory& traj, const std::string& path);

}  // namespace mrnls
