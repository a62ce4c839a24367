// Smooth frequency cutoff shared by the Littlewood-Paley projections and the
// Morawetz weight family: non-increasing, identically 1 on [0,1], supported in
// [0,2], built from the exp(-1/x) mollifier and tabulated once at startup.
#pragma once

#include <vector>

namespace mrnls {

struct CutoffTable {
    double smax = 2.0;   // support end
    double ds = 0.0;     // table spacing
    std::vector<double> values;
};

// theta(s): 1 for s <= 1, 0 for s >= 2, smooth monotone ramp in between.
// Table-backed with linear interpolation between analytic samples, so the
// function is deterministic and monotone.
double smooth_cutoff(double s);

// Analytic evaluation used to fill the table (exact ramp value).
double smooth_cutoff_exact(double s);

// Read-only access to the shared table, for the weight-table audits.
const CutoffTable& cutoff_table();

}  // namespace mrnls
