#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "ldos.hpp"
#include "mapping.hpp"
#include "phonons.hpp"

namespace fanoqed {

using Mat4 = Eigen::Matrix<cplx, 4, 4>;
using Mat16 = Eigen::Matrix<cplx, 16, 16>;
using Vec16 = Eigen::Matrix<cplx, 16, 1>;

// Basis: |g,0,0>, |e,0,0>, |g,1,0>, |g,0,1>
namespace basis {
inline constexpr int g00 = 0, e00 = 1, g10 = 2, g01 = 3;
inline constexpr int dim = 4;
// column-stacked vectorisation: vec(rho)[i + 4 j] = rho(i, j)
constexpr int idx(int i, int j) { return i + dim * j; }
} // namespace basis

struct BasisOperators {
    Mat4 sigma, a1, a2, X, Y;
};

inline BasisOperators basis_operators() {
    BasisOperators o;
    o.sigma.setZero();
    o.a1.setZero();
    o.a2.setZero();
    o.sigma(basis::g00, basis::e00) = 1.0;
    o.a1(basis::g00, basis::g10) = 1.0;
    o.a2(basis::g00, basis::g01) = 1.0;
    // X = sigma^+ a1 + sigma a1^+, Y = i(sigma^+ a1 - sigma a1^+), single-excitation block
    o.X.setZero();
    o.X(basis::e00, basis::g10) = 1.0;
    o.X(basis::g10, basis::e00) = 1.0;
    o.Y.setZero();
    o.Y(basis::e00, basis::g10) = I1;
    o.Y(basis::g10, basis::e00) = -I1;
    return o;
}

inline Mat16 spre(const Mat4& A) { return kroneckerProduct(Mat4::Identity(), A).eval(); }
inline Mat16 spost(const Mat4& B) { return kroneckerProduct(B.transpose(), Mat4::Identity()).eval(); }
inline Mat16 sandwich(const Mat4& A, const Mat4& B) { return kroneckerProduct(B.transpose(), A).eval(); }
inline Mat16 dissipator(const Mat4& J) {
    const Mat4 JdJ = J.adjoint() * J;
    return sandwich(J, J.adjoint()) - 0.5 * spre(JdJ) - 0.5 * spost(JdJ);
}

inline Vec16 vec(const Mat4& rho) { return Eigen::Map<const Vec16>(rho.data()); }
inline Mat4 unvec(const Vec16& v) { return Eigen::Map<const Mat4>(v.data()); }

// H0 in a frame rotating at `reference` (all frequencies become detunings).
inline Mat4 build_h0(const MappedPair& p, const EmitterCoupling& em, double B0, double reference) {
    Mat4 H = Mat4::Zero();
    H(basis::e00, basis::e00) = em.omega_eg - reference;
    H(basis::g10, basis::g10) = p.omega_1 - reference;
    H(basis::g01, basis::g01) = p.omega_2 - reference;
    H(basis::e00, basis::g10) = H(basis::g10, basis::e00) = B0 * p.g;
    const cplx V = std::polar(p.V_0, p.varphi);
    H(basis::g10, basis::g01) = V;
    H(basis::g01, basis::g10) = std::conj(V);
    return H;
}
inline Mat4 build_h0(const MappedPair& p, const EmitterCoupling& em, double B0) {
    return build_h0(p, em, B0, em.omega_eg);
}

struct ThetaOps {
    Mat4 X, Y;
};

// Theta_zeta = int_0^inf zeta(-tau) Lambda_zeta(tau) dtau, evaluated in the H0 eigenbasis
// so that the oscillation e^{-i(E_m-E_n)tau} is exact at every quadrature node.
inline ThetaOps theta_ops(const Mat4& H0, const PhononCorrelations& c) {
    ThetaOps th{Mat4::Zero(), Mat4::Zero()};
    if (c.trivial()) return th;
    Eigen::SelfAdjointEigenSolver<Mat4> es(H0);
    const auto& E = es.eigenvalues();
    const Mat4& U = es.eigenvectors();
    const auto ops = basis_operators();
    Mat4 IX = Mat4::Zero(), IY = Mat4::Zero();
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) {
            const double dE = E(m) - E(n);
            cplx sx = 0.0, sy = 0.0;
            for (std::size_t k = 0; k < c.tau.size(); ++k) {
                const cplx e = c.w[k] * std::polar(1.0, -dE * c.tau[k]);
                sx += e * c.LX[k];
                sy += e * c.LY[k];
            }
            IX(m, n) = sx;
            IY(m, n) = sy;
        }
    th.X = U * (U.adjoint() * ops.X * U).cwiseProduct(IX) * U.adjoint();
    th.Y = U * (U.adjoint() * ops.Y * U).cwiseProduct(IY) * U.adjoint();
    return th;
}

struct Liouvillian {
    Mat16 L;
    Mat4 H0;
    MappedPair pair;
    EmitterCoupling emitter;
    double B0 = 1.0;
    double reference = 0.0; // rotating-frame frequency
};

inline Liouvillian build_liouvillian(const Mat4& H0, const MappedPair& p, const EmitterCoupling& em,
                                     const ThetaOps& th, double g) {
    const auto ops = basis_operators();
    Liouvillian out;
    out.H0 = H0;
    out.pair = p;
    out.emitter = em;
    Mat16 L = -I1 * (spre(H0) - spost(H0));
    const Mat4 jc = std::sqrt(p.kappa_1) * ops.a1 + std::sqrt(p.kappa_2) * ops.a2;
    L += dissipator(jc) + em.Gamma_R * dissipator(ops.sigma);
    const std::pair<const Mat4*, const Mat4*> terms[] = {{&ops.X, &th.X}, {&ops.Y, &th.Y}};
    for (auto [Z, T] : terms) {
        const Mat4 Td = T->adjoint();
        L += g * g * (sandwich(*Z, Td) - spost(Td * *Z) + sandwich(*T, *Z) - spre(*Z * *T));
    }
    out.L = L;
    return out;
}

// Liouvillian of the full model: H0 in the frame of omega_eg, Theta from the phonon tables.
inline Liouvillian make_liouvillian(const MappedPair& p, const EmitterCoupling& em, const PhononCorrelations& c) {
    const Mat4 H0 = build_h0(p, em, c.B0);
    auto L = build_liouvillian(H0, p, em, theta_ops(H0, c), p.g);
    L.B0 = c.B0;
    L.reference = em.omega_eg;
    return L;
}

inline Mat4 excited_state() {
    Mat4 r = Mat4::Zero();
    r(basis::e00, basis::e00) = 1.0;
    return r;
}

inline Mat4 evolve(const Liouvillian& L, const Mat4& rho0, double t) {
    if (t < 0.0) throw DomainError("evolve: t must be nonnegative");
    if (t == 0.0) return rho0;
    const Mat16 P = (L.L * t).exp();
    if (!P.allFinite()) throw DegeneracyError("evolve: matrix exponential not finite");
    return unvec(P * vec(rho0));
}

struct TrajectoryCheck {
    double max_trace_dev = 0.0;
    double max_herm_dev = 0.0;
    double min_eig = 1.0;
    int samples = 0;

    void merge(const TrajectoryCheck& o) {
        max_trace_dev = std::max(max_trace_dev, o.max_trace_dev);
        max_herm_dev = std::max(max_herm_dev, o.max_herm_dev);
        min_eig = std::min(min_eig, o.min_eig);
        samples += o.samples;
    }
    bool conserving(double trace_tol = 1e-12, double herm_tol = 1e-12) const {
        return max_trace_dev < trace_tol && max_herm_dev < herm_tol;
    }
    // the polaron generator is not completely positive, so small negative eigenvalues are tolerated
    bool ok(double trace_tol = 1e-12, double herm_tol = 1e-12, double eig_tol = -1e-6) const {
        return conserving(trace_tol, herm_tol) && min_eig >= eig_tol;
    }
};

inline void inspect_state(const Mat4& rho, TrajectoryCheck& chk) {
    chk.max_trace_dev = std::max(chk.max_trace_dev, std::abs(rho.trace() - 1.0));
    chk.max_herm_dev = std::max(chk.max_herm_dev, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
    const Mat4 h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat4> es(h, Eigen::EigenvaluesOnly);
    chk.min_eig = std::min(chk.min_eig, es.eigenvalues().minCoeff());
    ++chk.samples;
}

// slowest nonzero decay rate of the generator
inline double slowest_rate(const Liouvillian& L) {
    Eigen::ComplexEigenSolver<Mat16> es(L.L, false);
    double rate = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 16; ++k) {
        const double r = -es.eigenvalues()(k).real();
        if (r > 1e-14) rate = std::min(rate, r);
    }
    return rate;
}

// rho(t) = e^{Lt} rho0 checked for trace, Hermiticity and positivity on `samples` times:
// half on a uniform grid resolving the fastest rate of the generator, half geometric up to
// the time at which the slowest decay has progressed by `decades`. Propagators are built in
// extended precision so that long products stay well below the checked tolerances.
inline TrajectoryCheck check_trajectory(const Liouvillian& L, const Mat4& rho0, int samples = 200,
                                        double decades = 12.0) {
    using cl = std::complex<long double>;
    using Mat16L = Eigen::Matrix<cl, 16, 16>;
    using Vec16L = Eigen::Matrix<cl, 16, 1>;
    TrajectoryCheck chk;
    inspect_state(rho0, chk);
    Eigen::ComplexEigenSolver<Mat16> es(L.L, false);
    double slow = std::numeric_limits<double>::infinity(), fast = 0.0;
    for (int k = 0; k < 16; ++k) {
        const cplx l = es.eigenvalues()(k);
        if (-l.real() > 1e-14) slow = std::min(slow, -l.real());
        fast = std::max(fast, std::abs(l));
    }
    if (!std::isfinite(slow) || samples < 2) return chk;
    const Mat16L Lq = L.L.cast<cl>();
    const Vec16L v0 = vec(rho0).cast<cl>();
    const int n1 = samples / 2, n2 = samples - n1;

    const double dt = 0.25 / fast;
    const Mat16L P = (Lq * cl(dt)).exp();
    Vec16L v = v0;
    for (int k = 0; k < n1; ++k) {
        v = P * v;
        inspect_state(unvec(v.cast<cplx>()), chk);
    }
    const double t0 = n1 * dt, t1 = std::max(decades * std::log(10.0) / slow, 2.0 * t0);
    for (int k = 1; k <= n2; ++k) {
        const double t = t0 * std::pow(t1 / t0, double(k) / n2);
        const Vec16L u = (Lq * cl(t)).exp() * v0;
        inspect_state(unvec(u.cast<cplx>()), chk);
    }
    return chk;
}

struct TwoTimeGrid {
    double dt = 0.0;
    double reference = 0.0; // C is stored in the frame rotating at this frequency
    Eigen::MatrixXcd C;     // C(n, m) = <sigma^+(t_n) sigma(t_m)>, t_n = n dt
    double edge_ratio = 0.0; // |C| at the final time relative to its maximum
    TrajectoryCheck check;
};

// Quantum regression on a uniform grid; the result includes the phonon factor
// B0^2 e^{phi(t - t')} of the lab-frame dipole.
inline TwoTimeGrid two_time_dipole(const Liouvillian& L, const Mat4& rho0, double dt, int nt,
                                   const PhononCorrelations& c) {
    if (!(dt > 0.0) || nt < 2) throw DomainError("two_time_dipole: need dt > 0 and at least two points");
    TwoTimeGrid out;
    out.dt = dt;
    out.reference = L.reference;
    out.C.resize(nt, nt);
    const Mat16 P = (L.L * dt).exp();
    const auto ops = basis_operators();
    const Mat16 S = spre(ops.sigma);
    std::vector<double> taus(nt);
    for (int k = 0; k < nt; ++k) taus[k] = k * dt;
    const auto ph = phi_table(c.env, taus);
    const double B2 = c.B0 * c.B0;
    constexpr int probe = basis::idx(basis::g00, basis::e00); // Tr[sigma^+ X] = X(g, e)

    Vec16 rho = vec(rho0);
    for (int m = 0; m < nt; ++m) {
        inspect_state(unvec(rho), out.check);
        Vec16 v = S * rho;
        for (int k = 0; m + k < nt; ++k) {
            const cplx val = B2 * std::exp(ph[k]) * v(probe);
            out.C(m + k, m) = val;
            out.C(m, m + k) = std::conj(val);
            v = P * v;
        }
        rho = P * rho;
    }
    const double peak = out.C.cwiseAbs().maxCoeff();
    out.edge_ratio = peak > 0.0 ? std::abs(out.C(nt - 1, nt - 1)) / peak : 0.0;
    return out;
}

} // namespace fanoqed
