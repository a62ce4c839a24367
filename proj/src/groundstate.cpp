// Solvers and functionals for the coupled elliptic pair
//     (1 - Delta) phi = -phi psi,
//     (2 - kappa Delta) psi = -phi^2.
// Both solvers work on real radial profiles with spectral Helmholtz
// inverses; the renormalization method rescales by the stabilizing factor
// (quadratic nonlinearity, exponent 2), the descent method follows the
// preconditioned action gradient and reprojects onto the constraint
// 2(G + M) + 3P = 0 after every step. The Newton polish solves the dense
// linearized system assembled from the spectral operators.
#include "mrnls/groundstate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "mrnls/serialize.hpp"
#include "mrnls/spectral.hpp"

namespace mrnls {

namespace {

std::vector<cplx> to_cplx(const std::vector<double>& f) {
    std::vector<cplx> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = cplx(f[i], 0.0);
    return out;
}

double quad_sum(const Grid& g, const std::vector<double>& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += g.weights[i] * f[i];
    return acc;
}

double real_l2sq(const Grid& g, const std::vector<double>& f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += g.weights[i] * f[i] * f[i];
    return acc;
}

// sum_k W_k |k|^2 |f_hat|^2 for an already transformed field.
double grad_sq_from_spec(const Grid& g, const std::vector<double>& lap,
                         const std::vector<cplx>& spec) {
    double acc = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i)
        acc += g.kweights[i] * (-lap[i]) * std::norm(spec[i]);
    return acc;
}

struct Elliptic {
    const SpectralPlan& plan;
    const Grid& g;
    const std::vector<double>& lap;  // -|k|^2 symbol
    double kappa;

    explicit Elliptic(const std::shared_ptr<const Grid>& grid, double k)
        : plan(get_plan(grid)), g(*grid), lap(plan.laplacian_symbol()), kappa(k) {}

    // (a - b Delta)^{-1} rhs.
    std::vector<double> helmholtz_inverse(double a, double b,
                                          const std::vector<double>& rhs) const {
        std::vector<cplx> spec = plan.forward(to_cplx(rhs));
        for (std::size_t i = 0; i < spec.size(); ++i) spec[i] /= (a - b * lap[i]);
        std::vector<cplx> out = plan.inverse(spec);
        std::vector<double> re(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) re[i] = out[i].real();
        return re;
    }

    std::vector<double> laplacian(const std::vector<cplx>& spec) const {
        std::vector<cplx> tmp(spec.size());
        for (std::size_t i = 0; i < spec.size(); ++i) tmp[i] = lap[i] * spec[i];
        std::vector<cplx> out = plan.inverse(tmp);
        std::vector<double> re(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) re[i] = out[i].real();
        return re;
    }

    // max of the L^2 residuals of the two equations.
    double residual(const std::vector<double>& phi, const std::vector<double>& psi) const {
        std::vector<cplx> sp = plan.forward(to_cplx(phi));
        std::vector<cplx> ss = plan.forward(to_cplx(psi));
        std::vector<double> lphi = laplacian(sp);
        std::vector<double> lpsi = laplacian(ss);
        double r1 = 0.0, r2 = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double e1 = phi[i] - lphi[i] + phi[i] * psi[i];
            const double e2 = 2.0 * psi[i] - kappa * lpsi[i] + phi[i] * phi[i];
            r1 += g.weights[i] * e1 * e1;
            r2 += g.weights[i] * e2 * e2;
        }
        return std::max(std::sqrt(r1), std::sqrt(r2));
    }

    double h1_scale(const std::vector<double>& phi, const std::vector<double>& psi) const {
        std::vector<cplx> sp = plan.forward(to_cplx(phi));
        std::vector<cplx> ss = plan.forward(to_cplx(psi));
        const double gp = grad_sq_from_spec(g, lap, sp);
        const double gs = grad_sq_from_spec(g, lap, ss);
        return std::sqrt(real_l2sq(g, phi) + gp) + std::sqrt(real_l2sq(g, psi) + gs);
    }
};

struct Functionals {
    double m_phi = 0, m_psi = 0;      // L^2 masses
    double g_phi = 0, g_psi = 0;      // plain gradient squares
    double p = 0;                     // int phi^2 psi
};

Functionals functionals(const Elliptic& op, const std::vector<double>& phi,
                        const std::vector<double>& psi) {
    Functionals f;
    f.m_phi = real_l2sq(op.g, phi);
    f.m_psi = real_l2sq(op.g, psi);
    std::vector<cplx> sp = op.plan.forward(to_cplx(phi));
    std::vector<cplx> ss = op.plan.forward(to_cplx(psi));
    f.g_phi = grad_sq_from_spec(op.g, op.lap, sp);
    f.g_psi = grad_sq_from_spec(op.g, op.lap, ss);
    std::vector<double> cube(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) cube[i] = phi[i] * phi[i] * psi[i];
    f.p = quad_sum(op.g, cube);
    return f;
}

void seed_profiles(const Elliptic& op, const SolveOptions& opts,
                   std::vector<double>& phi, std::vector<double>& psi) {
    const Grid& g = op.g;
    const std::size_t np = g.npoints();
    phi.assign(np, 0.0);
    for (std::size_t i = 0; i < np; ++i) {
        const double r = g.nodes[i];
        phi[i] = opts.seed_amplitude *
                 std::exp(-r * r / (2.0 * opts.seed_width * opts.seed_width));
    }
    if (std::sqrt(real_l2sq(g, phi)) < 1e-14) {
        throw std::runtime_error("solve_ground_state: collapsed to the trivial solution");
    }
    std::vector<double> sq(np);
    for (std::size_t i = 0; i < np; ++i) sq[i] = phi[i] * phi[i];
    psi = op.helmholtz_inverse(2.0, op.kappa, sq);
    for (std::size_t i = 0; i < np; ++i) psi[i] = -psi[i];
}

[[noreturn]] void report_no_convergence(SolveMethod method,
                                        const std::vector<double>& history) {
    double lo = history.empty() ? 0.0 : history.front();
    for (double h : history) lo = std::min(lo, h);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "solve_ground_state(%s): no convergence after %zu iterations; "
                  "residual %.3e -> %.3e (min %.3e)",
                  method == SolveMethod::renormalization ? "renormalization"
                                                         : "gradient_flow",
                  history.empty() ? 0 : history.size() - 1,
                  history.empty() ? 0.0 : history.front(),
                  history.empty() ? 0.0 : history.back(), lo);
    throw std::runtime_error(buf);
}

void check_alive(const Elliptic& op, const std::vector<double>& phi) {
    if (std::sqrt(real_l2sq(op.g, phi)) < 1e-12) {
        throw std::runtime_error("solve_ground_state: collapsed to the trivial solution");
    }
}

// Fixed-point iteration with one stabilizing factor per equation,
//   S1 = <(1-Delta)phi, phi> / <-phi psi, phi>,
//   S2 = <(2-kappa Delta)psi, psi> / <-phi^2, psi>,
//   phi <- S1^{3/2} S2^{1/2} (1-Delta)^{-1}(-phi psi),
//   psi <- S1 S2 (2-kappa Delta)^{-1}(-phi^2).
// Both factors equal 1 at a solution. For the quadratic coupling the pair
// (a phi, b psi) maps its amplitude errors through a' = a^{1-2q} b^{1-p+q},
// b' = a^{2-2s} b^{s-r} under exponents (p, q, r, s); the choice
// (3/2, 1/2, 1, 1) annihilates both amplitude modes, which a single common
// factor cannot do (it leaves a marginal ratio mode).
bool renormalization_loop(const Elliptic& op, const SolveOptions& opts,
                          std::vector<double>& phi, std::vector<double>& psi,
                          std::vector<double>& history) {
    const std::size_t np = phi.size();
    for (int it = 0; it < opts.max_iterations; ++it) {
        const Functionals f = functionals(op, phi, psi);
        const double den = -f.p;  // <-phi psi, phi> = <-phi^2, psi> = -P
        if (!(den > 0.0)) {
            throw std::runtime_error(
                "solve_ground_state(renormalization): interaction term lost its sign");
        }
        const double s1 = (f.g_phi + f.m_phi) / den;
        const double s2 = (op.kappa * f.g_psi + 2.0 * f.m_psi) / den;
        const double c_phi = std::pow(s1, 1.5) * std::sqrt(s2);
        const double c_psi = s1 * s2;
        std::vector<double> n1(np), n2(np);
        for (std::size_t i = 0; i < np; ++i) {
            n1[i] = -phi[i] * psi[i];
            n2[i] = -phi[i] * phi[i];
        }
        phi = op.helmholtz_inverse(1.0, 1.0, n1);
        psi = op.helmholtz_inverse(2.0, op.kappa, n2);
        for (std::size_t i = 0; i < np; ++i) {
            phi[i] *= c_phi;
            psi[i] *= c_psi;
        }
        check_alive(op, phi);
        const double res = op.residual(phi, psi);
        history.push_back(res);
        if (res < opts.tolerance * op.h1_scale(phi, psi)) return true;
    }
    return false;
}

// Preconditioned descent on the action with constraint reprojection: the
// gradient in the (1-Delta, 2-kappa Delta) metric is
//   (phi + (1-Delta)^{-1}(phi psi), psi + (2-kappa Delta)^{-1}(phi^2)),
// and after each step the pair is rescaled by a = -2(G+M)/(3P) so that
// <I'(phi,psi), (phi,psi)> = 2(G+M) + 3P stays zero.
bool gradient_flow_loop(const Elliptic& op, const SolveOptions& opts,
                        std::vector<double>& phi, std::vector<double>& psi,
                        std::vector<double>& history, bool allow_polish_handoff) {
    const std::size_t np = phi.size();
    const auto project = [&]() {
        const Functionals f = functionals(op, phi, psi);
        const double gm = f.g_phi + 0.5 * op.kappa * f.g_psi + f.m_phi + f.m_psi;
        if (!(f.p < 0.0)) {
            throw std::runtime_error(
                "solve_ground_state(gradient_flow): interaction term lost its sign");
        }
        const double a = -2.0 * gm / (3.0 * f.p);
        for (std::size_t i = 0; i < np; ++i) {
            phi[i] *= a;
            psi[i] *= a;
        }
    };
    project();
    int stalled = 0;
    for (int it = 0; it < opts.max_iterations; ++it) {
        std::vector<double> prod(np), sq(np);
        for (std::size_t i = 0; i < np; ++i) {
            prod[i] = phi[i] * psi[i];
            sq[i] = phi[i] * phi[i];
        }
        const std::vector<double> gphi = op.helmholtz_inverse(1.0, 1.0, prod);
        const std::vector<double> gpsi = op.helmholtz_inverse(2.0, op.kappa, sq);
        const double tau = opts.descent_step;
        for (std::size_t i = 0; i < np; ++i) {
            phi[i] -= tau * (phi[i] + gphi[i]);
            psi[i] -= tau * (psi[i] + gpsi[i]);
        }
        check_alive(op, phi);
        project();
        const double res = op.residual(phi, psi);
        const double prev = history.empty() ? res * 2.0 : history.back();
        history.push_back(res);
        if (res < opts.tolerance * op.h1_scale(phi, psi)) return true;
        stalled = (res > 0.9995 * prev) ? stalled + 1 : 0;
        if (allow_polish_handoff && stalled >= 8 &&
            res < 1e-6 * op.h1_scale(phi, psi)) {
            return true;  // rounding plateau of the descent map; polish finishes
        }
    }
    return false;
}

// Dense (a - b Delta) matrix assembled column by column through the plan.
Eigen::MatrixXd helmholtz_dense(const Elliptic& op, double a, double b) {
    const std::size_t np = op.g.npoints();
    Eigen::MatrixXd mat(np, np);
    std::vector<cplx> e(np), spec(np), out(np);
    for (std::size_t j = 0; j < np; ++j) {
        std::fill(e.begin(), e.end(), cplx(0.0, 0.0));
        e[j] = cplx(1.0, 0.0);
        op.plan.forward(e.data(), spec.data());
        for (std::size_t i = 0; i < np; ++i) spec[i] *= (a - b * op.lap[i]);
        op.plan.inverse(spec.data(), out.data());
        for (std::size_t i = 0; i < np; ++i) mat(i, j) = out[i].real();
    }
    return mat;
}

// Newton steps on F = ((1-Delta)phi + phi psi, (2-kappa Delta)psi + phi^2);
// a step is accepted only if it lowers the residual, so the recorded history
// stays monotone down to the rounding floor.
void newton_polish(const Elliptic& op, std::vector<double>& phi,
                   std::vector<double>& psi, std::vector<double>& history) {
    const std::size_t np = phi.size();
    const Eigen::MatrixXd a1 = helmholtz_dense(op, 1.0, 1.0);
    const Eigen::MatrixXd a2 = helmholtz_dense(op, 2.0, op.kappa);
    double current = op.residual(phi, psi);
    for (int it = 0; it < 12; ++it) {
        Eigen::MatrixXd jac(2 * np, 2 * np);
        jac.topLeftCorner(np, np) = a1;
        jac.topRightCorner(np, np).setZero();
        jac.bottomLeftCorner(np, np).setZero();
        jac.bottomRightCorner(np, np) = a2;
        Eigen::VectorXd rhs(2 * np);
        Eigen::VectorXd vphi(np), vpsi(np);
        for (std::size_t i = 0; i < np; ++i) {
            jac(i, i) += psi[i];
            jac(i, np + i) = phi[i];
            jac(np + i, i) = 2.0 * phi[i];
            vphi(i) = phi[i];
            vpsi(i) = psi[i];
        }
        rhs.head(np) = -(a1 * vphi);
        rhs.tail(np) = -(a2 * vpsi);
        for (std::size_t i = 0; i < np; ++i) {
            rhs(i) -= phi[i] * psi[i];
            rhs(np + i) -= phi[i] * phi[i];
        }
        const Eigen::VectorXd delta = jac.partialPivLu().solve(rhs);
        std::vector<double> tphi(phi), tpsi(psi);
        for (std::size_t i = 0; i < np; ++i) {
            tphi[i] += delta(i);
            tpsi[i] += delta(np + i);
        }
        const double res = op.residual(tphi, tpsi);
        if (!(res < current)) break;
        phi.swap(tphi);
        psi.swap(tpsi);
        history.push_back(res);
        current = res;
        if (res < 1e-14 * op.h1_scale(phi, psi)) break;
    }
}

nlohmann::json grid_descriptor(const Grid& g) {
    return nlohmann::json{{"kind", g.kind == GridKind::radial4d ? "radial4d" : "cartesian"},
                          {"n", g.n},
                          {"extent", g.extent},
                          {"dims", g.dims}};
}

}  // namespace

double action(const std::shared_ptr<const Grid>& grid, const std::vector<double>& phi,
              const std::vector<double>& psi, double kappa) {
    if (!grid) throw std::runtime_error("action: null grid");
    if (phi.size() != grid->npoints() || psi.size() != grid->npoints()) {
        throw std::runtime_error("action: profile size does not match grid");
    }
    const Elliptic op(grid, kappa);
    const Functionals f = functionals(op, phi, psi);
    return f.g_phi + 0.5 * kappa * f.g_psi + f.m_phi + f.m_psi + f.p;
}

GroundState solve_ground_state(double kappa, std::shared_ptr<const Grid> grid,
                               SolveMethod method, const SolveOptions& opts) {
    if (!grid || grid->kind != GridKind::radial4d) {
        throw std::runtime_error("solve_ground_state: radial4d grid required");
    }
    if (!(kappa > 0.0)) throw std::runtime_error("solve_ground_state: kappa must be positive");
    const Elliptic op(grid, kappa);
    std::vector<double> phi, psi;
    seed_profiles(op, opts, phi, psi);

    std::vector<double> history;
    history.push_back(op.residual(phi, psi));
    bool converged = false;
    if (method == SolveMethod::renormalization) {
        converged = renormalization_loop(op, opts, phi, psi, history);
    } else {
        converged = gradient_flow_loop(op, opts, phi, psi, history, opts.newton_polish);
    }
    if (!converged) report_no_convergence(method, history);
    if (opts.newton_polish) newton_polish(op, phi, psi, history);

    if (phi.front() < 0.0) {
        for (double& x : phi) x = -x;  // phi -> -phi leaves both equations invariant
    }

    GroundState gs;
    gs.grid = grid;
    gs.kappa = kappa;
    gs.phi = std::move(phi);
    gs.psi = std::move(psi);
    const Functionals f = functionals(op, gs.phi, gs.psi);
    gs.mass = f.m_phi + f.m_psi;
    gs.action = f.g_phi + 0.5 * kappa * f.g_psi + f.m_phi + f.m_psi + f.p;
    gs.residual = op.residual(gs.phi, gs.psi);
    gs.iterations = static_cast<int>(history.size()) - 1;
    gs.residual_history = std::move(history);
    return gs;
}

double gn_ratio(const StatePair& pair, double kappa, double mass_gs) {
    if (!(mass_gs > 0.0)) throw std::runtime_error("gn_ratio: threshold mass must be positive");
    const Grid& g = *pair.grid;
    const SpectralPlan& plan = get_plan(pair.grid);
    double inter = 0.0;
    for (std::size_t i = 0; i < g.npoints(); ++i) {
        inter += g.weights[i] * (pair.u[i] * pair.u[i] * std::conj(pair.v[i])).real();
    }
    const double num = std::abs(inter);
    const double mass = l2sq(g, pair.u) + l2sq(g, pair.v);
    const double grad = grad_l2sq(plan, pair.u) + 0.5 * kappa * grad_l2sq(plan, pair.v);
    const double den = std::sqrt(mass / mass_gs) * grad;
    if (den <= 0.0) {
        if (num <= 1e-14 * (1.0 + mass)) return 0.0;
        throw std::runtime_error(
            "gn_ratio: zero gradient with nonzero interaction violates the inequality");
    }
    return num / den;
}

std::vector<ThresholdPoint> threshold_scan_data(const GroundState& gs,
                                                const std::vector<double>& c_values) {
    const Elliptic op(gs.grid, gs.kappa);
    const Functionals f = functionals(op, gs.phi, gs.psi);
    const double mass = f.m_phi + f.m_psi;
    const double grad = f.g_phi + 0.5 * gs.kappa * f.g_psi;
    std::vector<ThresholdPoint> out;
    out.reserve(c_values.size());
    for (double c : c_values) {
        if (!(c >= 0.0) || c >= 2.0) {
            throw std::runtime_error("threshold_scan_data: c values must lie in [0, 2)");
        }
        ThresholdPoint pt;
        pt.c = c;
        pt.mass = c * c * mass;
        pt.energy = c * c * grad + c * c * c * f.p;
        out.push_back(pt);
    }
    return out;
}

StatePair to_state_pair(const GroundState& gs) {
    StatePair pair = make_state(gs.grid, gs.kappa);
    pair.u = to_cplx(gs.phi);
    pair.v = to_cplx(gs.psi);
    pair.t = 0.0;
    return pair;
}

void save_ground_state(const GroundState& gs, const std::string& prefix) {
    save_state(to_state_pair(gs), prefix + ".bin");
    nlohmann::json meta{{"kappa", gs.kappa},
                        {"mass", gs.mass},
                        {"action", gs.action},
                        {"residual", gs.residual},
                        {"iterations", gs.iterations},
                        {"grid", grid_descriptor(*gs.grid)}};
    std::ofstream out(prefix + ".json");
    if (!out) throw std::runtime_error("save_ground_state: cannot open " + prefix + ".json");
    out << meta.dump(2) << "\n";
}

GroundState load_ground_state(const std::string& prefix) {
    std::ifstream in(prefix + ".json");
    if (!in) throw std::runtime_error("load_ground_state: cannot open " + prefix + ".json");
    nlohmann::json meta = nlohmann::json::parse(in);
    StatePair pair = load_state(prefix + ".bin");
    const nlohmann::json& gd = meta.at("grid");
    if (gd.at("n").get<int>() != pair.grid->n ||
        gd.at("dims").get<int>() != pair.grid->dims ||
        std::abs(gd.at("extent").get<double>() - pair.grid->extent) > 1e-12 ||
        gd.at("kind").get<std::string>() !=
            (pair.grid->kind == GridKind::radial4d ? "radial4d" : "cartesian")) {
        throw std::runtime_error("load_ground_state: metadata and field grid disagree");
    }
    if (std::abs(meta.at("kappa").get<double>() - pair.kappa) > 1e-12) {
        throw std::runtime_error("load_ground_state: metadata and field kappa disagree");
    }
    GroundState gs;
    gs.grid = pair.grid;
    gs.kappa = pair.kappa;
    gs.phi.resize(pair.u.size());
    gs.psi.resize(pair.v.size());
    for (std::size_t i = 0; i < pair.u.size(); ++i) {
        gs.phi[i] = pair.u[i].real();
        gs.psi[i] = pair.v[i].real();
    }
    gs.mass = meta.at("mass").get<double>();
    gs.action = meta.at("action").get<double>();
    gs.residual = meta.at("residual").get<double>();
    gs.iterations = meta.at("iterations").get<int>();
    return gs;
}

void write_threshold_registry(const std::string& path,
                              const std::vector<std::pair<double, double>>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [kappa, mass] : rows) {
        arr.push_back(nlohmann::json{{"kappa", kappa}, {"mass", mass}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_threshold_registry: cannot open " + path);
    out << arr.dump(2) << "\n";
}

std::vector<std::pair<double, double>> load_threshold_registry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_threshold_registry: cannot open " + path);
    nlohmann::json arr = nlohmann::json::parse(in);
    if (!arr.is_array()) throw std::runtime_error("load_threshold_registry: expected an array");
    std::vector<std::pair<double, double>> rows;
    for (const auto& row : arr) {
        rows.emplace_back(row.at("kappa").get<double>(), row.at("mass").get<double>());
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

double registry_threshold_mass(const std::vector<std::pair<double, double>>& rows,
                               double kappa) {
    for (const auto& [k, m] : rows) {
        if (std::abs(k - kappa) < 1e-9) return m;
    }
    throw std::runtime_error("registry_threshold_mass: no entry for the requested kappa");
}

}  // namespace mrnls
