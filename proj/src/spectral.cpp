// Spectral transform implementation.
//
// Radial: the classical order-1 QDHT matrix between the Bessel-zero nodes is
//   F_c = D_out T D_in,  T(m,k) = (2/S) J1(j_m j_k / S) / (|J2(j_m)||J2(j_k)|),
//   d_out[m] = |J2(j_m)| / (K kap_m),  d_in[k] = R r_k / |J2(j_k)|,
// which realizes u_hat(kap) = (1/kap) int_0^R u(r) J1(kap r) r^2 dr. T is only
// approximately orthogonal (truncation of the Bessel series), so the plan
// replaces the weighted kernel A = Dsqrt(Wk) F_c Dsqrt(W)^-1 by its orthogonal
// polar factor Q (Newton iteration X <- (X + X^-T)/2). The stored transform
//   F = Dsqrt(Wk)^-1 Q Dsqrt(W),  F^-1 = Dsqrt(W)^-1 Q^T Dsqrt(Wk)
// is then exactly unitary between the grid's weighted spaces, and agrees with
// F_c to the QDHT truncation error on resolved fields.
//
// Cartesian: FFTW with the centred-box normalization documented in the header.
// Plans are created once per grid under a global mutex with
// FFTW_ESTIMATE | FFTW_UNALIGNED (deterministic plans, any-array execution).

#include "mrnls/spectral.hpp"

#include <fftw3.h>
#include <gsl/gsl_sf_bessel.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace mrnls {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }
fftw_complex* as_fftw(const cplx* p) {
    return reinterpret_cast<fftw_complex*>(const_cast<cplx*>(p));
}

// Orthogonal polar factor of a nonsingular near-orthogonal matrix.
Eigen::MatrixXd polar_factor(Eigen::MatrixXd x) {
    for (int iter = 0; iter < 40; ++iter) {
        Eigen::MatrixXd next = 0.5 * (x + x.inverse().transpose());
        const double step = (next - x).norm();
        x.swap(next);
        if (step <= 1e-15 * x.norm()) break;
    }
    return x;
}

}  // namespace

struct SpectralPlan::Impl {
    // radial
    Eigen::MatrixXd fwd;   // spectral = fwd * physical
    Eigen::MatrixXd inv;   // physical = inv * spectral
    std::vector<double> w1;  // spectral quadrature weights 2K^2/(S^2 J2(j_m)^2)
    mutable Eigen::MatrixXd d1;  // d/dr at nodes from spectral data (lazy)
    mutable std::once_flag d1_once;

    // cartesian
    fftw_plan plan_fwd = nullptr;
    fftw_plan plan_bwd = nullptr;
    double cf = 1.0;  // forward scale (2 pi)^{-d/2} h^d
    double cb = 1.0;  // backward scale (2 pi)^{-d/2} dxi^d

    ~Impl() {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        if (plan_fwd) fftw_destroy_plan(plan_fwd);
        if (plan_bwd) fftw_destroy_plan(plan_bwd);
    }
};

SpectralPlan::SpectralPlan(std::shared_ptr<const Grid> grid)
    : grid_(std::move(grid)), impl_(new Impl) {
    const Grid& g = *grid_;
    const std::size_t np = g.npoints();
    lap_.resize(np);
    for (std::size_t i = 0; i < np; ++i) {
        const double k = g.wavenumber_mag(i);
        lap_[i] = -k * k;
    }

    if (g.kind == GridKind::radial4d) {
        const int n = g.n;
        const double R = g.extent;
        std::vector<double> jz(static_cast<std::size_t>(n) + 1);
        for (int k = 1; k <= n + 1; ++k) {
            jz[static_cast<std::size_t>(k - 1)] = gsl_sf_bessel_zero_J1(static_cast<unsigned>(k));
        }
        const double S = jz[static_cast<std::size_t>(n)];
        const double K = S / R;

        std::vector<double> j2(static_cast<std::size_t>(n));
        impl_->w1.resize(static_cast<std::size_t>(n));
        for (int m = 0; m < n; ++m) {
            j2[static_cast<std::size_t>(m)] = std::abs(gsl_sf_bessel_Jn(2, jz[static_cast<std::size_t>(m)]));
            impl_->w1[static_cast<std::size_t>(m)] =
                2.0 * K * K / (S * S * j2[static_cast<std::size_t>(m)] * j2[static_cast<std::size_t>(m)]);
        }

        Eigen::MatrixXd fc(n, n);
        for (int m = 0; m < n; ++m) {
            const double dout = j2[static_cast<std::size_t>(m)] / (K * g.knodes[static_cast<std::size_t>(m)]);
            for (int k = 0; k < n; ++k) {
                const double t = (2.0 / S) * gsl_sf_bessel_J1(jz[static_cast<std::size_t>(m)] *
                                                              jz[static_cast<std::size_t>(k)] / S) /
                                 (j2[static_cast<std::size_t>(m)] * j2[static_cast<std::size_t>(k)]);
                const double din = R * g.nodes[static_cast<std::size_t>(k)] / j2[static_cast<std::size_t>(k)];
                fc(m, k) = dout * t * din;
            }
        }

        Eigen::VectorXd sw(n), swk(n);
        for (int k = 0; k < n; ++k) {
            sw(k) = std::sqrt(g.weights[static_cast<std::size_t>(k)]);
            swk(k) = std::sqrt(g.kweights[static_cast<std::size_t>(k)]);
        }
        Eigen::MatrixXd a = swk.asDiagonal() * fc * sw.cwiseInverse().asDiagonal();
        Eigen::MatrixXd q = polar_factor(a);
        impl_->fwd = swk.cwiseInverse().asDiagonal() * q * sw.asDiagonal();
        impl_->inv = sw.cwiseInverse().asDiagonal() * q.transpose() * swk.asDiagonal();
        return;
    }

    // cartesian
    const int n = g.n;
    const int d = g.dims;
    const double h = g.extent / n;
    const double dxi = 2.0 * kPi / g.extent;
    impl_->cf = std::pow(2.0 * kPi, -0.5 * d) * std::pow(h, d);
    impl_->cb = std::pow(2.0 * kPi, -0.5 * d) * std::pow(dxi, d);

    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_complex* scratch_in = fftw_alloc_complex(np);
    fftw_complex* scratch_out = fftw_alloc_complex(np);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    if (d == 1) {
        impl_->plan_fwd = fftw_plan_dft_1d(n, scratch_in, scratch_out, FFTW_FORWARD, flags);
        impl_->plan_bwd = fftw_plan_dft_1d(n, scratch_in, scratch_out, FFTW_BACKWARD, flags);
    } else {
        impl_->plan_fwd = fftw_plan_dft_2d(n, n, scratch_in, scratch_out, FFTW_FORWARD, flags);
        impl_->plan_bwd = fftw_plan_dft_2d(n, n, scratch_in, scratch_out, FFTW_BACKWARD, flags);
    }
    fftw_free(scratch_in);
    fftw_free(scratch_out);
    if (!impl_->plan_fwd || !impl_->plan_bwd) {
        throw std::runtime_error("SpectralPlan: FFTW plan creation failed");
    }
}

SpectralPlan::~SpectralPlan() = default;

namespace {

// Applies F (real n x n) to a complex vector by mapping it as an n x 2
// row-major real matrix (std::complex layout is [re, im]).
void real_mat_apply(const Eigen::MatrixXd& f, const cplx* in, cplx* out, int n) {
    using Mat2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
    Eigen::Map<const Mat2> min(reinterpret_cast<const double*>(in), n, 2);
    Eigen::Map<Mat2> mout(reinterpret_cast<double*>(out), n, 2);
    mout.noalias() = f * min;
}

int parity_sign(const Grid& g, std::size_t i) {
    if (g.dims == 1) return (i & 1u) ? -1 : 1;
    const std::size_t n = static_cast<std::size_t>(g.n);
    return ((i / n + i % n) & 1u) ? -1 : 1;
}

}  // namespace

void SpectralPlan::forward(const cplx* in, cplx* out) const {
    const Grid& g = *grid_;
    if (g.kind == GridKind::radial4d) {
        real_mat_apply(impl_->fwd, in, out, g.n);
        return;
    }
    fftw_execute_dft(impl_->plan_fwd, as_fftw(in), as_fftw(out));
    const std::size_t np = g.npoints();
    for (std::size_t i = 0; i < np; ++i) {
        out[i] *= impl_->cf * parity_sign(g, i);
    }
}

void SpectralPlan::inverse(const cplx* in, cplx* out) const {
    const Grid& g = *grid_;
    if (g.kind == GridKind::radial4d) {
        real_mat_apply(impl_->inv, in, out, g.n);
        return;
    }
    const std::size_t np = g.npoints();
    std::vector<cplx> tmp(np);
    for (std::size_t i = 0; i < np; ++i) {
        tmp[i] = in[i] * static_cast<double>(parity_sign(g, i));
    }
    fftw_execute_dft(impl_->plan_bwd, as_fftw(tmp.data()), as_fftw(out));
    for (std::size_t i = 0; i < np; ++i) out[i] *= impl_->cb;
}

std::vector<cplx> SpectralPlan::forward(const std::vector<cplx>& field) const {
    if (field.size() != grid_->npoints()) {
        throw std::runtime_error("SpectralPlan::forward: field size does not match grid");
    }
    std::vector<cplx> out(field.size());
    forward(field.data(), out.data());
    return out;
}

std::vector<cplx> SpectralPlan::inverse(const std::vector<cplx>& field) const {
    if (field.size() != grid_->npoints()) {
        throw std::runtime_error("SpectralPlan::inverse: field size does not match grid");
    }
    std::vector<cplx> out(field.size());
    inverse(field.data(), out.data());
    return out;
}

cplx SpectralPlan::eval_interpolant(const std::vector<cplx>& spec, double r) const {
    const Grid& g = *grid_;
    if (g.kind != GridKind::radial4d) {
        throw std::runtime_error("eval_interpolant: radial grids only");
    }
    if (spec.size() != g.npoints()) {
        throw std::runtime_error("eval_interpolant: field size does not match grid");
    }
    const int n = g.n;
    // The Fourier-Bessel series represents the field on [0, R] only; beyond
    // the grid the field is taken as decayed.
    if (r > g.extent) return cplx(0.0, 0.0);
    cplx acc(0.0, 0.0);
    if (r < 1e-12 * g.extent) {
        for (int m = 0; m < n; ++m) {
            const double kap = g.knodes[static_cast<std::size_t>(m)];
            acc += impl_->w1[static_cast<std::size_t>(m)] * kap * kap * 0.5 * spec[static_cast<std::size_t>(m)];
        }
        return acc;
    }
    for (int m = 0; m < n; ++m) {
        const double kap = g.knodes[static_cast<std::size_t>(m)];
        acc += impl_->w1[static_cast<std::size_t>(m)] * kap * gsl_sf_bessel_J1(kap * r) / r *
               spec[static_cast<std::size_t>(m)];
    }
    return acc;
}

cplx SpectralPlan::eval_interpolant_derivative(const std::vector<cplx>& spec, double r) const {
    const Grid& g = *grid_;
    if (g.kind != GridKind::radial4d) {
        throw std::runtime_error("eval_interpolant_derivative: radial grids only");
    }
    if (spec.size() != g.npoints()) {
        throw std::runtime_error("eval_interpolant_derivative: field size does not match grid");
    }
    // d/dr of the mode (1/r) J1(kap r) is kap J0(kap r)/r - 2 J1(kap r)/r^2,
    // with limit 0 at r = 0.
    if (r > g.extent || r < 1e-12 * g.extent) return cplx(0.0, 0.0);
    const int n = g.n;
    cplx acc(0.0, 0.0);
    for (int m = 0; m < n; ++m) {
        const double kap = g.knodes[static_cast<std::size_t>(m)];
        acc += impl_->w1[static_cast<std::size_t>(m)] * kap *
               (kap * gsl_sf_bessel_J0(kap * r) / r -
                2.0 * gsl_sf_bessel_J1(kap * r) / (r * r)) *
               spec[static_cast<std::size_t>(m)];
    }
    return acc;
}

void SpectralPlan::radial_derivative_from_spectral(const std::vector<cplx>& spec,
                                                   std::vector<cplx>& ddr) const {
    const Grid& g = *grid_;
    if (g.kind != GridKind::radial4d) {
        throw std::runtime_error("radial_derivative: radial grids only");
    }
    if (spec.size() != g.npoints()) {
        throw std::runtime_error("radial_derivative: field size does not match grid");
    }
    const int n = g.n;
    std::call_once(impl_->d1_once, [&] {
        // d/dr of the interpolant u(r) = (1/r) sum_m w1_m kap_m u_hat_m J1(kap_m r):
        // coefficient kap_m J0(kap_m r)/r - 2 J1(kap_m r)/r^2 per mode.
        impl_->d1.resize(n, n);
        for (int k = 0; k < n; ++k) {
            const double r = g.nodes[static_cast<std::size_t>(k)];
            for (int m = 0; m < n; ++m) {
                const double kap = g.knodes[static_cast<std::size_t>(m)];
                impl_->d1(k, m) = impl_->w1[static_cast<std::size_t>(m)] * kap *
                                  (kap * gsl_sf_bessel_J0(kap * r) / r -
                                   2.0 * gsl_sf_bessel_J1(kap * r) / (r * r));
            }
        }
    });
    ddr.resize(static_cast<std::size_t>(n));
    real_mat_apply(impl_->d1, spec.data(), ddr.data(), n);
}

std::vector<cplx> SpectralPlan::radial_derivative(const std::vector<cplx>& phys) const {
    std::vector<cplx> spec = forward(phys);
    std::vector<cplx> ddr;
    radial_derivative_from_spectral(spec, ddr);
    return ddr;
}

const SpectralPlan& get_plan(const std::shared_ptr<const Grid>& grid) {
    using Key = std::tuple<int, int, std::uint64_t, int>;
    static std::mutex cache_mutex;
    static std::map<Key, std::unique_ptr<SpectralPlan>>& cache =
        *new std::map<Key, std::unique_ptr<SpectralPlan>>();
    std::uint64_t ebits = 0;
    static_assert(sizeof(ebits) == sizeof(double), "extent key packing");
    std::memcpy(&ebits, &grid->extent, sizeof(ebits));
    const Key key{static_cast<int>(grid->kind), grid->n, ebits, grid->dims};
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(key);
    if (it == cache.end()) {
        it = cache.emplace(key, std::make_unique<SpectralPlan>(grid)).first;
    }
    return *it->second;
}

std::vector<cplx> trig_eval_progression(const std::vector<cplx>& coef, double dxi,
                                        double a, double step) {
    const int n = static_cast<int>(coef.size());
    if (n < 2 || (n & (n - 1)) != 0) {
        throw std::runtime_error("trig_eval_progression: length must be a power of two");
    }
    const int m2 = 2 * n;

    // Cached length-2n plans for the Bluestein convolution.
    struct CztPlans {
        fftw_plan fwd = nullptr;
        fftw_plan bwd = nullptr;
    };
    static std::mutex cache_mutex;
    static std::map<int, CztPlans>& plans = *new std::map<int, CztPlans>();
    CztPlans p;
    {
        std::lock_guard<std::mutex> lock(cache_mutex);
        auto it = plans.find(m2);
        if (it == plans.end()) {
            std::lock_guard<std::mutex> flock(fftw_mutex());
            fftw_complex* s1 = fftw_alloc_complex(static_cast<std::size_t>(m2));
            fftw_complex* s2 = fftw_alloc_complex(static_cast<std::size_t>(m2));
            CztPlans np;
            np.fwd = fftw_plan_dft_1d(m2, s1, s2, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
            np.bwd = fftw_plan_dft_1d(m2, s1, s2, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
            fftw_free(s1);
            fftw_free(s2);
            it = plans.emplace(m2, np).first;
        }
        p = it->second;
    }

    // f(y) = sum_j coef[j] e^{i dxi jt y} with jt the signed frequency index.
    // Reorder to l = jt + n/2 in 0..n-1, then with W = e^{i dxi step}:
    //   f(a + m step) = e^{-i dxi (n/2)(a + m step)} sum_l c_l W^{l m},
    //   c_l = coef[(l + n/2) mod n] e^{i dxi l a}.
    // Bluestein: W^{lm} = W^{l^2/2} W^{m^2/2} W^{-(m-l)^2/2}, a circular
    // convolution of length 2n. Chirp angles are reduced mod 2 pi in long
    // double to keep precision at large l^2.
    const long double twopi = 2.0L * 3.141592653589793238462643383279502884L;
    auto ldpolar = [&](long double ang) -> cplx {  // e^{i ang}, reduced in long double
        ang = std::fmod(ang, twopi);
        return cplx(static_cast<double>(std::cos(ang)), static_cast<double>(std::sin(ang)));
    };
    const long double half = 0.5L * static_cast<long double>(dxi) * static_cast<long double>(step);
    auto chirp = [&](long long idx2) -> cplx {  // e^{+i half * idx2}
        return ldpolar(half * static_cast<long double>(idx2));
    };

    const long double ldxi = static_cast<long double>(dxi);
    std::vector<cplx> pvec(static_cast<std::size_t>(m2), cplx(0.0, 0.0));
    for (int l = 0; l < n; ++l) {
        const cplx c = coef[static_cast<std::size_t>((l + n / 2) % n)] *
                       ldpolar(ldxi * l * static_cast<long double>(a));
        pvec[static_cast<std::size_t>(l)] = c * chirp(static_cast<long long>(l) * l);
    }
    std::vector<cplx> qvec(static_cast<std::size_t>(m2), cplx(0.0, 0.0));
    for (int t = -(n - 1); t <= n - 1; ++t) {
        const int slot = (t >= 0) ? t : m2 + t;
        qvec[static_cast<std::size_t>(slot)] = std::conj(chirp(static_cast<long long>(t) * t));
    }

    std::vector<cplx> pf(static_cast<std::size_t>(m2)), qf(static_cast<std::size_t>(m2));
    fftw_execute_dft(p.fwd, as_fftw(pvec.data()), as_fftw(pf.data()));
    fftw_execute_dft(p.fwd, as_fftw(qvec.data()), as_fftw(qf.data()));
    for (int i = 0; i < m2; ++i) pf[static_cast<std::size_t>(i)] *= qf[static_cast<std::size_t>(i)];
    std::vector<cplx> conv(static_cast<std::size_t>(m2));
    fftw_execute_dft(p.bwd, as_fftw(pf.data()), as_fftw(conv.data()));

    std::vector<cplx> out(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) {
        const long double y = static_cast<long double>(a) + static_cast<long double>(m) * step;
        const cplx outer = ldpolar(-ldxi * (n / 2) * y);
        out[static_cast<std::size_t>(m)] =
            outer * chirp(static_cast<long long>(m) * m) * conv[static_cast<std::size_t>(m)] /
            static_cast<double>(m2);
    }
    return out;
}

}  // namespace mrnls
