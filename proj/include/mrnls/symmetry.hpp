// The symmetry group acting on field pairs. The single-channel action is
//   h(theta, xi0, x0, lambda) w(x) = lambda^{-d/2} e^{i theta} e^{i x.xi0}
//                                    w(lambda^{-1}(x - x0)),
// and the pair action gives v the parameters theta/kappa and xi0/kappa while
// sharing x0 and lambda with u. The trailing s slot is a time-translation
// parameter consumed by profile synthesis (free evolution); the spatial
// operations here leave it aside, so (0,0,0,1,0) acts as the identity.
#pragma once

#include <array>
#include <string>

#include "mrnls/state.hpp"

namespace mrnls {

struct SymmetryElement {
    double theta = 0.0;
    std::array<double, 2> xi0{0.0, 0.0};
    std::array<double, 2> x0{0.0, 0.0};
    double lambda = 1.0;
    double s = 0.0;
};

// Mass-preserving group action per the definition above. Radial grids accept
// only xi0 = x0 = 0 (pure phase and scaling).
StatePair apply_symmetry(const SymmetryElement& g, const StatePair& pair);

// (u, v)(x) -> (e^{i x.xi} e^{-i t |xi|^2} u(x - 2 t xi),
//              e^{2 i x.xi} e^{-2 i t |xi|^2} v(x - 2 t xi)).
// Cartesian grids only; the returned pair keeps the input time stamp.
StatePair galilean_boost(const StatePair& pair, std::array<double, 2> xi, double t);

// Equation scaling (u, v) -> lambda^{-2} (u, v)(lambda^{-2} t, lambda^{-1} x);
// the time stamp maps t -> lambda^2 t. Mass-invariant exactly in d = 4.
StatePair scaling_transform(const StatePair& pair, double lambda);

// Returns and clears the last resolution warning raised on this thread by a
// scaling that pushed significant mass toward the grid boundary (physical or
// spectral). Empty string if none.
std::string take_resolution_warning();

}  // namespace mrnls
