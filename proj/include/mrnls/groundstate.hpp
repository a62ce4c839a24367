// Ground states of the coupled elliptic system
//     (1 - Delta) phi = -phi psi,
//     (2 - kappa Delta) psi = -phi^2,
// real radial profiles on a radial4d grid. Two solvers (spectral
// renormalization and preconditioned constrained descent) with an optional
// Newton polish, the action functional, the sharp interaction-inequality
// ratio, threshold scan data, and persistence plus a kappa -> threshold-mass
// registry.
#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mrnls/grid.hpp"
#include "mrnls/state.hpp"

namespace mrnls {

struct GroundState {
    std::shared_ptr<const Grid> grid;
    std::vector<double> phi;  // real radial profile, phi(0) > 0
    std::vector<double> psi;  // real radial profile, psi <= 0
    double kappa = 0.5;
    double mass = 0.0;      // ||phi||^2 + ||psi||^2
    double action = 0.0;    // I(phi, psi)
    double residual = 0.0;  // max of the two equation residuals in L^2
    int iterations = 0;     // accepted iterations including the polish
    std::vector<double> residual_history;
};

enum class SolveMethod { renormalization, gradient_flow };

struct SolveOptions {
    int max_iterations = 800;
    // Converged when residual < tolerance * (||phi||_H1 + ||psi||_H1).
    double tolerance = 1e-10;
    bool newton_polish = true;
    double seed_amplitude = 3.0;
    double seed_width = 1.5;
    double descent_step = 0.6;  // gradient_flow only
};

// I(phi, psi) = ||grad phi||^2 + (kappa/2) ||grad psi||^2 + ||phi||^2
//             + ||psi||^2 + int phi^2 psi dx.
double action(const std::shared_ptr<const Grid>& grid, const std::vector<double>& phi,
              const std::vector<double>& psi, double kappa);

// Throws on non-convergence (message carries the residual history range) and
// on collapse to the trivial solution.
GroundState solve_ground_state(double kappa, std::shared_ptr<const Grid> grid,
                               SolveMethod method, const SolveOptions& opts = {});

// |Re int u^2 conj(v)| / [ sqrt(M(u,v)/mass_gs) (||grad u||^2 + (kappa/2) ||grad v||^2) ].
// Returns 0 for vanishing interaction; a zero denominator with a nonzero
// numerator throws (it would violate the inequality).
double gn_ratio(const StatePair& pair, double kappa, double mass_gs);

struct ThresholdPoint {
    double c = 0.0;
    double mass = 0.0;
    double energy = 0.0;
};

// Scaled data c (phi, psi): mass = c^2 M and energy = c^2 G + c^3 P with
// G = ||grad phi||^2 + (kappa/2) ||grad psi||^2 and P = int phi^2 psi dx.
std::vector<ThresholdPoint> threshold_scan_data(const GroundState& gs,
                                                const std::vector<double>& c_values);

// Complex field pair (phi, psi) at t = 0 for the evolution code.
StatePair to_state_pair(const GroundState& gs);

// Persist as <prefix>.bin (binary field pair) plus <prefix>.json (kappa,
// mass, action, residual, iterations, grid descriptor). load checks that the
// two files describe the same grid.
void save_ground_state(const GroundState& gs, const std::string& prefix);
GroundState load_ground_state(const std::string& prefix);

// kappa -> threshold mass registry, a JSON array of {kappa, mass} rows.
void write_threshold_registry(const std::string& path,
                              const std::vector<std::pair<double, double>>& rows);
std::vector<std::pair<double, double>> load_threshold_registry(const std::string& path);
// Entry whose kappa matches within 1e-9; throws if absent.
double registry_threshold_mass(const std::vector<std::pair<double, double>>& rows,
                               double kappa);

}  // namespace mrnls
