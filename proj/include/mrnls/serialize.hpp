// Flat binary container and CSV export for field pairs.
//
// Binary layout (little-endian host assumed): 8-byte magic "MRNLSF1\0",
// uint8 kind, int32 n, float64 extent, int32 dims, float64 t, float64 kappa,
// then the u samples and the v samples as raw complex<double>.
#pragma once

#include <string>

#include "mrnls/state.hpp"

namespace mrnls {

void save_state(const StatePair& pair, const std::string& path);
StatePair load_state(const std::string& path);

// CSV columns: node coordinate(s), Re u, Im u, Re v, Im v.
void write_state_csv(const StatePair& pair, const std::string& path);

}  // namespace mrnls
