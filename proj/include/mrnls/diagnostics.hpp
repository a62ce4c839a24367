// Conserved quantities and monitoring functionals for field pairs, plus the
// trackers used along whole runs: scattering size, characteristic intervals,
// almost-periodicity parameter estimates, the C0-ladder frequency scale with
// its peak-leveling and C1 smoothing, the Morawetz / interaction functionals
// with their weight families, the virial identity check, and the long-time
// Strichartz monitor.
//
// Conventions:
//   mass    M = |u|_2^2 + |v|_2^2
//   energy  E = |grad u|_2^2 + (kappa/2) |grad v|_2^2 + Re integral u^2 conj(v)
//   scattering size over a window  S = integral (|u|^3 + |v|^3) dx dt
#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mrnls/dynamics.hpp"
#include "mrnls/state.hpp"

namespace mrnls {

double mass(const StatePair& pair);
double energy(const StatePair& pair);

// integral (|u|^3 + |v|^3) dx at one time slice; its time integral is the
// scattering size S.
double cubic_density(const StatePair& pair);

// |grad u|^2 + |grad v|^2.
double gradient_norm_sq(const StatePair& pair);

// Fraction of the mass carried beyond radius frac * R_max (radial grids).
double boundary_mass_fraction(const StatePair& pair, double frac);

// ---------------------------------------------------------------------------
// Scattering size and characteristic intervals
// ---------------------------------------------------------------------------

// S over [t0, t1]: trapezoid of the per-snapshot cubic density with linear
// interpolation at the window ends, so the value is exactly additive over
// adjacent windows and matches the recorded running accumulator at record
// times. Throws if the window is not inside the recorded span.
double scattering_size(const Trajectory& traj, double t0, double t1);

struct Partition {
    // t_0 < t_1 < ... with unit scattering size on each [t_k, t_{k+1});
    // empty when the total is below one unit (see note).
    std::vector<double> boundaries;
    double total_s = 0.0;
    std::string note;
};

// Boundaries where the running accumulator crosses consecutive integers,
// located by linear interpolation between samples. The leading boundary is
// the first sample time; a trailing partial interval is dropped.
Partition characteristic_partition(const std::vector<double>& time,
                                   const std::vector<double>& s_accumulator);
Partition characteristic_partition(const Trajectory& traj);

// ---------------------------------------------------------------------------
// Almost-periodicity parameter estimates
// ---------------------------------------------------------------------------

// Deterministic estimator of the concentration parameters of a pair:
//   x_est   mass centroid of |u|^2 + |v|^2 (zero on radial grids),
//   xi_est  spectral centroid of |u_hat|^2,
//   xi_v_est  spectral centroid of |v_hat|^2 (tracks 2 xi_est for pairs
//             concentrated in the doubled-frequency channel),
//   n_est   smallest dyadic N = 2^j such that the spatial tails beyond
//           radius C/N around x_est and the spectral tails beyond C N
//           around xi_est (for u) and 2 xi_est (for v) each carry at most
//           eta * M of the mass, with window constant C = eta^{-1/2}.
struct CenterEstimates {
    double n_est = 0.0;
    std::array<double, 2> x_est{0.0, 0.0};
    std::array<double, 2> xi_est{0.0, 0.0};
    std::array<double, 2> xi_v_est{0.0, 0.0};
};

CenterEstimates track_centers(const StatePair& pair, double eta = 0.1);

// ---------------------------------------------------------------------------
// Frequency-scale ladder: quantization, peak leveling, C1 smoothing
// ---------------------------------------------------------------------------

struct FrequencyScale {
    std::vector<double> t_bounds;  // interval boundaries, size values.size()+1
    std::vector<double> values;    // constant value on [t_k, t_{k+1})
    double c0 = 2.0;               // ladder ratio, > 1
};

// Snap raw per-interval samples onto the C0-ladder {C0^j : j integer}: the
// quantized value q satisfies q <= sample < C0 q.
FrequencyScale quantize_frequency_scale(const std::vector<double>& t_bounds,
                                        const std::vector<double>& samples,
                                        double c0 = 2.0);

// m rounds of peak lowering: a peak is a maximal plateau whose two
// neighbouring intervals both sit exactly one ladder rung lower; each round
// lowers every peak by one rung. Plateaus touching the ends of the record
// have no outer neighbour and are left alone. Requires the input to be on
// the ladder with consecutive ratios in {1/C0, 1, C0}.
FrequencyScale peak_level(const FrequencyScale& scale, int m);

// C1 interpolant of a leveled ladder: on each interval a monotone cubic ramp
// connecting C0^{-1} N_m(t_k) to C0^{-1} N_m(t_{k+1}) with vanishing endpoint
// slope, constant beyond the record. Satisfies value(t_k) = C0^{-1} N_m(t_k)
// and |value'(t)| <= 2 C0 value(t) / |J_k|.
struct SmoothScale {
    FrequencyScale base;
    double value(double t) const;
    double derivative(double t) const;
};

SmoothScale smooth_frequency_scale(const FrequencyScale& leveled);

// Smallest constant C such that both
//   |xi(t_k) - xi(t_{k+1})| <= 2^{-10} C N(t_k)  and
//   |xi(t_k) - xi(t_{k+1})| <= 2^{-10} C int_{J_k} N^3 dt
// hold over the observed intervals, floored at 1. xi_samples holds the
// frequency center at each boundary of the scale.
double estimate_c_star(const FrequencyScale& scale,
                       const std::vector<std::array<double, 2>>& xi_samples);

// ---------------------------------------------------------------------------
// Weight families for the Morawetz and interaction functionals
// ---------------------------------------------------------------------------

// Base cutoff theta (1 on [0,1], 0 beyond 2) and its radial average
//   Theta(r) = (1/r) integral_0^r theta, Theta(0) = 1,
// evaluated from a cached fine antiderivative table.
double big_theta_base(double r);

// Tabulated weight family at scale L >= 8 on a uniform radial mesh:
//   vartheta(r) = theta(max{0, r - L + 2})   (1 on [0, L-1], 0 beyond L)
//   chi(r)      = theta(max{0, r - L + 3})
//   theta_l(r)  = integral vartheta(|r e1 - z|) vartheta(|z|) dz / L^4 in 4D,
//                 reduced to a double 1D integral against the spherical
//                 overlap kernel and smoothed by a trigonometric substitution
//                 at the kernel's square-root endpoints,
//   big_theta_l(r) = (1/r) integral_0^r theta_l, big_theta_l(0) = theta_l(0).
// Beyond the mesh, theta_l vanishes and big_theta_l continues analytically
// as (integral of theta_l) / r.
struct WeightFamily {
    double L = 8.0;
    std::vector<double> r;  // uniform mesh on [0, 2L], r[0] = 0
    std::vector<double> theta;
    std::vector<double> big_theta;
    std::vector<double> vartheta;
    std::vector<double> chi;
    std::vector<double> theta_l;
    std::vector<double> big_theta_l;
    double theta_l_integral = 0.0;  // integral_0^{2L} theta_l

    double eval_theta_l(double rr) const;      // linear interp, 0 beyond mesh
    double eval_big_theta_l(double rr) const;  // analytic 1/r tail beyond mesh
};

WeightFamily weight_tables(double L, int mesh = 2048);

// ---------------------------------------------------------------------------
// Virial identity
// ---------------------------------------------------------------------------

// V = 4 Im integral x . (conj(u) grad u + (1/2) conj(v) grad v) dx.
double virial_momentum(const StatePair& pair);

// V(t) along a trajectory with its centered-difference rate against the
// conserved 8E. The identity dV/dt = 8E holds at kappa = 1/2; for other
// kappa the rate series is still reported but marked inapplicable.
struct VirialCheck {
    std::vector<double> time;
    std::vector<double> virial;
    std::vector<double> rate;  // centered differences, size time.size()-2
    double eight_e = 0.0;      // 8 E at the first snapshot
    bool applicable = false;   // kappa == 1/2
    double max_rel_defect = 0.0;
};

VirialCheck virial_rate_check(const Trajectory& traj);

// ---------------------------------------------------------------------------
// Morawetz functional (radial)
// ---------------------------------------------------------------------------

// M(t) = integral Theta(ntilde |x| / L) ntilde x . Im[conj(U) grad U
//        + (1/2) conj(V) grad V] dx with (U, V) = P_{<= K}(u, v).
// Pass K = infinity to skip the projection. Radial grids only.
double morawetz_radial(const StatePair& pair, double ntilde, double L,
                       double K = std::numeric_limits<double>::infinity());

// ---------------------------------------------------------------------------
// Interaction functional and its window quantities
// ---------------------------------------------------------------------------

struct InteractionOptions {
    double ntilde = 1.0;
    double L = 8.0;
    // Frequency cut applied as (U, V) = P_{<= k_cut}(u, v); infinity = none.
    double k_cut = std::numeric_limits<double>::infinity();
    // Gradient-density convention: true uses |grad U|^2 + (1/4)|grad V|^2,
    // false uses the energy weights |grad U|^2 + (kappa/2)|grad V|^2. The two
    // coincide at kappa = 1/2.
    bool quarter_e2 = true;
    // Refusal threshold for the cartesian double sum (points squared).
    double pair_budget = 1e8;
};

// Pointwise densities of the projected pair (U, V):
//   m = |U|^2 + |V|^2, p = Im[conj(U) grad U + (1/2) conj(V) grad V],
//   e2 = |grad U|^2 + c |grad V|^2 (c per options), e3 = Re[U^2 conj(V)].
struct InteractionDensities {
    std::vector<double> m;
    std::vector<std::array<double, 2>> p;  // radial grids: (radial comp, 0)
    std::vector<double> e2;
    std::vector<double> e3;
};

InteractionDensities interaction_densities(const StatePair& pair,
                                           const InteractionOptions& opt);

struct InteractionResult {
    double value = 0.0;  // the double-integral functional
    InteractionDensities densities;
};

// M(t) = integral integral Theta_L(ntilde |x-y|) ntilde (x-y) . p(x) m(y);
// cartesian d <= 2 by direct double summation over point pairs (sharing the
// kernel between (i,j) and (j,i)), radial grids by a 1D double integral with
// the spherical angular kernel. Refuses cartesian grids whose squared point
// count exceeds the budget.
InteractionResult interaction_functional(const StatePair& pair,
                                         const InteractionOptions& opt);

// Window integrals against vartheta_L(ntilde x - z) and the gauge-invariant
// combination
//   script_e = (integral (e2+e3) w) (integral m w) - |integral p w|^2,
// with the recentering frequency xi0 = (integral p w) / (integral m w)
// (zero when the denominator vanishes).
struct InteractionWindow {
    std::array<double, 2> xi0{0.0, 0.0};
    double script_e = 0.0;
    double m_integral = 0.0;
    std::array<double, 2> p_integral{0.0, 0.0};
    double e23_integral = 0.0;
};

InteractionWindow interaction_window(const StatePair& pair,
                                     const InteractionOptions& opt,
                                     std::array<double, 2> z);

// ---------------------------------------------------------------------------
// Long-time Strichartz monitor
// ---------------------------------------------------------------------------

struct LtsRow {
    double n = 0.0;         // frequency cut
    double measured = 0.0;  // |P_{|xi-xi(t)|>N} u|_{L2L4} + v term at 2 xi(t)
    double bound = 0.0;     // (K/N)^{1/2} with K = integral n_est(t)^3 dt
    double ratio = 0.0;     // measured / bound
    double k_total = 0.0;
};

// Measures the high-frequency space-time norm of the recorded snapshots
// against the (K/N)^{1/2} envelope. Centers xi(t) and the scale n_est(t)
// come from track_centers per snapshot (identically zero on radial grids).
// Requires at least four snapshots and n <= c_star * K.
LtsRow lts_monitor(const Trajectory& traj, double n, double c_star,
                   double eta = 0.1);
std::vector<LtsRow> lts_report(const Trajectory& traj,
                               const std::vector<double>& n_values,
                               double c_star, double eta = 0.1);

// ---------------------------------------------------------------------------
// Series assembly and CSV emission
// ---------------------------------------------------------------------------

struct SeriesReport {
    std::vector<double> time;
    std::vector<double> mass;
    std::vector<double> energy;
    std::vector<double> s_accumulator;
    std::vector<double> gradient_norm;
    std::vector<double> n_est;
    std::vector<std::array<double, 2>> x_est;
    std::vector<std::array<double, 2>> xi_est;
    std::vector<double> virial;
    std::vector<double> morawetz;  // radial runs; zeros on cartesian
    std::vector<double> boundaries;
    std::string partition_note;
};

struct ReportOptions {
    double eta = 0.1;
    double morawetz_l = 8.0;
    double morawetz_k = std::numeric_limits<double>::infinity();
};

SeriesReport assemble_report(const Trajectory& traj,
                             const ReportOptions& opt = {});

void write_report_csv(const SeriesReport& report, const std::string& path);
void write_weight_csv(const WeightFamily& family, const std::string& path);
void write_scale_csv(const FrequencyScale& scale, const std::string& path);

}  // namespace mrnls
