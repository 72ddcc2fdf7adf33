#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "core.hpp"

namespace fanoqed {

struct PhononEnv {
    double alpha = 0.069; // meV^-2
    double nu_c = 1.45;   // meV
    double T = 4.0;       // K

    double beta() const { return T > 0.0 ? 1.0 / (kB_meV_per_K * T) : std::numeric_limits<double>::infinity(); }
    double nu_max() const { return 8.0 * nu_c; }

    void validate() const {
        if (!(alpha >= 0.0)) throw DomainError("PhononEnv: alpha must be nonnegative");
        if (!(nu_c > 0.0)) throw DomainError("PhononEnv: nu_c must be positive");
        if (!(T >= 0.0)) throw DomainError("PhononEnv: T must be nonnegative");
    }
};

inline double phonon_sd(const PhononEnv& e, double nu) {
    if (nu < 0.0) throw DomainError("phonon_sd: nu must be nonnegative");
    return e.alpha * nu * nu * nu * std::exp(-nu * nu / (e.nu_c * e.nu_c));
}

namespace detail {
// J(nu)/nu^2 * coth(beta nu/2); regular at nu -> 0
inline double thermal_weight(const PhononEnv& e, double nu) {
    const double g = e.alpha * std::exp(-nu * nu / (e.nu_c * e.nu_c));
    if (e.T <= 0.0) return g * nu;
    const double x = 0.5 * e.beta() * nu;
    const double ncoth = x < 1e-6 ? (2.0 / e.beta()) * (1.0 + x * x / 3.0) : nu / std::tanh(x);
    return g * ncoth;
}
inline double vacuum_weight(const PhononEnv& e, double nu) {
    return e.alpha * nu * std::exp(-nu * nu / (e.nu_c * e.nu_c));
}
} // namespace detail

struct QuadratureBudget {
    double tol = 1e-12;
    unsigned max_depth = 20;
};

// phi(tau) by adaptive Gauss-Kronrod; phi(-tau) = conj phi(tau)
inline cplx phi(const PhononEnv& e, double tau, const QuadratureBudget& q = {}) {
    if (e.alpha == 0.0) return 0.0;
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    const double at = std::abs(tau);
    double err_re = 0.0, err_im = 0.0;
    const double re = GK::integrate([&](double nu) { return detail::thermal_weight(e, nu) * std::cos(nu * at); },
                                    0.0, e.nu_max(), q.max_depth, q.tol, &err_re);
    const double im = GK::integrate([&](double nu) { return detail::vacuum_weight(e, nu) * std::sin(nu * at); },
                                    0.0, e.nu_max(), q.max_depth, q.tol, &err_im);
    const double scale = std::abs(re) + std::abs(im) + e.alpha * e.nu_c * e.nu_c;
    if (err_re + err_im > 1e3 * q.tol * scale) throw ConvergenceError("phi: quadrature did not converge");
    const cplx v{re, -im};
    return tau >= 0.0 ? v : std::conj(v);
}

inline double franck_condon(const PhononEnv& e) { return std::exp(-0.5 * phi(e, 0.0).real()); }

inline cplx lambda_X(double B0, cplx ph) { return 0.5 * B0 * B0 * (std::exp(ph) + std::exp(-ph) - 2.0); }
inline cplx lambda_Y(double B0, cplx ph) { return 0.5 * B0 * B0 * (std::exp(ph) - std::exp(-ph)); }
inline cplx lambda_X(const PhononEnv& e, double tau) { return lambda_X(franck_condon(e), phi(e, tau)); }
inline cplx lambda_Y(const PhononEnv& e, double tau) { return lambda_Y(franck_condon(e), phi(e, tau)); }

// int_0^inf J(nu)/nu dnu
inline double polaron_shift(const PhononEnv& e, const QuadratureBudget& q = {}) {
    if (e.alpha == 0.0) return 0.0;
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    return GK::integrate([&](double nu) { return phonon_sd(e, nu) / nu; }, 0.0, e.nu_max(), q.max_depth, q.tol);
}

struct CorrelationSettings {
    double panel = 0.25;     // tau panel width, meV^-1
    int nodes = 16;          // Gauss-Legendre nodes per panel
    int nu_panels = 200;     // panels on [0, 8 nu_c] for the nu integral
    double rel_tol = 1e-8;   // stop when |Lambda| over a panel < rel_tol |Lambda_X(0)|
    double tau_cap = 400.0;  // hard limit on tau_max
};

// phi, Lambda_X, Lambda_Y tabulated on Gauss-Legendre nodes in tau, shared read-only.
struct PhononCorrelations {
    PhononEnv env;
    double B0 = 1.0;
    double phi0 = 0.0;
    double tau_max = 0.0;
    bool truncated = false; // tau_cap reached before the tolerance
    std::vector<double> tau, w;
    std::vector<cplx> phi, LX, LY;

    bool trivial() const { return env.alpha == 0.0; }
};

namespace detail {
struct NuRule {
    std::vector<double> nu, wt, wv; // nodes, thermal and vacuum weights
    NuRule(const PhononEnv& e, int panels) {
        PanelRule r(0.0, e.nu_max(), panels);
        nu = r.x;
        for (std::size_t i = 0; i < nu.size(); ++i) {
            wt.push_back(r.w[i] * thermal_weight(e, nu[i]));
            wv.push_back(r.w[i] * vacuum_weight(e, nu[i]));
        }
    }
    cplx operator()(double tau) const {
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < nu.size(); ++i) {
            re += wt[i] * std::cos(nu[i] * tau);
            im += wv[i] * std::sin(nu[i] * tau);
        }
        return {re, -im};
    }
};
} // namespace detail

// phi on arbitrary tau (fixed composite rule; used for dense grids)
inline std::vector<cplx> phi_table(const PhononEnv& e, const std::vector<double>& taus, int nu_panels = 200) {
    std::vector<cplx> out(taus.size(), 0.0);
    if (e.alpha == 0.0) return out;
    detail::NuRule rule(e, nu_panels);
    for (std::size_t i = 0; i < taus.size(); ++i)
        out[i] = taus[i] >= 0.0 ? rule(taus[i]) : std::conj(rule(-taus[i]));
    return out;
}

inline PhononCorrelations phonon_correlations(const PhononEnv& e, const CorrelationSettings& s = {}) {
    e.validate();
    PhononCorrelations c;
    c.env = e;
    if (e.alpha == 0.0) return c;
    detail::NuRule rule(e, s.nu_panels);
    c.phi0 = rule(0.0).real();
    c.B0 = std::exp(-0.5 * c.phi0);
    const double lx0 = std::abs(lambda_X(c.B0, c.phi0));
    std::vector<double> gx, gw;
    gauss_legendre(s.nodes, gx, gw);
    double a = 0.0;
    int quiet = 0; // consecutive panels below tolerance
    for (;;) {
        double peak = 0.0;
        for (int k = 0; k < s.nodes; ++k) {
            const double t = a + 0.5 * s.panel * (gx[k] + 1.0);
            const cplx ph = rule(t);
            c.tau.push_back(t);
            c.w.push_back(0.5 * s.panel * gw[k]);
            c.phi.push_back(ph);
            c.LX.push_back(lambda_X(c.B0, ph));
            c.LY.push_back(lambda_Y(c.B0, ph));
            peak = std::max({peak, std::abs(c.LX.back()), std::abs(c.LY.back())});
        }
        a += s.panel;
        quiet = peak < s.rel_tol * lx0 ? quiet + 1 : 0;
        if (quiet >= 4) break;
        if (a >= s.tau_cap) {
            c.truncated = true;
            break;
        }
    }
    c.tau_max = a;
    return c;
}

} // namespace fanoqed
