#include "oracle_quad.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oracle {

double simpson_uniform(const std::vector<double>& vals, double h) {
    const std::size_t n = vals.size();
    if (n < 3 || n % 2 == 0) throw std::runtime_error("simpson_uniform: need odd count >= 3");
    double acc = vals.front() + vals.back();
    for (std::size_t i = 1; i + 1 < n; ++i) acc += vals[i] * ((i % 2 == 1) ? 4.0 : 2.0);
    return acc * h / 3.0;
}

double lagrange_interp(const std::vector<double>& x, const std::vector<double>& f,
                       double x0) {
    const std::size_t n = x.size();
    if (n < 8) throw std::runtime_error("lagrange_interp: need at least 8 samples");
    // 8-point stencil centred on the insertion position.
    std::size_t hi = static_cast<std::size_t>(
        std::lower_bound(x.begin(), x.end(), x0) - x.begin());
    std::size_t start = (hi >= 4) ? hi - 4 : 0;
    start = std::min(start, n - 8);
    double acc = 0.0;
    for (std::size_t i = start; i < start + 8; ++i) {
        double li = 1.0;
        for (std::size_t j = start; j < start + 8; ++j) {
            if (j != i) li *= (x0 - x[j]) / (x[i] - x[j]);
        }
        acc += f[i] * li;
    }
    return acc;
}

double radial4d_integral_resample(const std::vector<double>& r,
                                  const std::vector<double>& vals, double R, int fine) {
    if (fine % 2 != 0) ++fine;
    const double h = R / fine;
    std::vector<double> g(static_cast<std::size_t>(fine) + 1);
    const double pi = 4.0 * std::atan(1.0);
    for (int i = 0; i <= fine; ++i) {
        const double rho = i * h;
        const double f = lagrange_interp(r, vals, rho);
        g[static_cast<std::size_t>(i)] = 2.0 * pi * pi * f * rho * rho * rho;
    }
    return simpson_uniform(g, h);
}

std::vector<double> fd_derivative(const std::vector<double>& x,
                                  const std::vector<double>& f) {
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hl = x[i] - x[i - 1];
        const double hr = x[i + 1] - x[i];
        d[i] = (f[i + 1] * hl * hl - f[i - 1] * hr * hr + f[i] * (hr * hr - hl * hl)) /
               (hl * hr * (hl + hr));
    }
    d[0] = (f[1] - f[0]) / (x[1] - x[0]);
    d[n - 1] = (f[n - 1] - f[n - 2]) / (x[n - 1] - x[n - 2]);
    return d;
}

}  // namespace oracle
