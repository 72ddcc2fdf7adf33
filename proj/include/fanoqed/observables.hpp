#pragma once

#include <functional>

#include "dynamics.hpp"

namespace fanoqed {

// Frequencies are detunings from `reference` (the rotating frame); weights are the
// quadrature weights of whatever rule produced the nodes.
struct FrequencyGrid {
    double reference = 0.0;
    std::vector<double> omega;
    std::vector<double> weight;

    std::size_t size() const { return omega.size(); }
    double lab(std::size_t i) const { return reference + omega[i]; }
};

struct Spectrum2D {
    FrequencyGrid grid;
    Eigen::MatrixXcd S;
    bool aliasing_warning = false;

    std::vector<double> diagonal() const {
        std::vector<double> d(grid.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = S(i, i).real();
        return d;
    }
};

struct IndistResult {
    double I = 0.0;
    double delta = 1.0;
    double P_emit = 0.0;
    // diagnostics
    int grid_points = 0;
    double grid_spacing = 0.0; // base spacing of the frequency rule
    double tau_max = 0.0;
    bool tau_truncated = false;
    TrajectoryCheck trajectory;
};

// ---- time-domain route ---------------------------------------------------------

// S0(w, w') = int int dt dt' e^{-i(w t - w' t')} C(t, t'), as a Riemann sum on the
// FFT-conjugate grid of the two-time grid.
inline Spectrum2D dipole_spectrum(const TwoTimeGrid& C) {
    const Eigen::Index n = C.C.rows();
    Spectrum2D out;
    out.grid.reference = C.reference;
    const double dw = 2.0 * pi / (n * C.dt);
    for (Eigen::Index a = 0; a < n; ++a) {
        out.grid.omega.push_back((a - n / 2) * dw);
        out.grid.weight.push_back(dw);
    }
    Eigen::MatrixXcd F(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index k = 0; k < n; ++k) F(a, k) = std::polar(1.0, -out.grid.omega[a] * k * C.dt);
    out.S = C.dt * C.dt * (F * C.C * F.adjoint());
    double peak = 0.0, edge = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
        peak = std::max(peak, std::abs(out.S(a, a)));
        if (a == 0 || a == n - 1) edge = std::max(edge, std::abs(out.S(a, a)));
    }
    out.aliasing_warning = edge > 1e-4 * peak;
    return out;
}

// S(w, w') = G(w)^* G(w') S0(w, w'); G takes lab-frame frequencies.
inline Spectrum2D filter_spectrum(const Spectrum2D& S0, const std::function<cplx(double)>& G) {
    Spectrum2D out = S0;
    const std::size_t n = S0.grid.size();
    std::vector<cplx> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = G(S0.grid.lab(i));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) out.S(a, b) = std::conj(g[a]) * g[b] * S0.S(a, b);
    return out;
}

inline double emitted_energy(const std::vector<double>& Sbar, const FrequencyGrid& grid, double Gamma_0) {
    double s = 0.0;
    for (std::size_t i = 0; i < Sbar.size(); ++i) s += grid.weight[i] * Sbar[i];
    return 0.5 * Gamma_0 * s;
}

inline IndistResult indistinguishability(const Spectrum2D& S, double P_emit, double Gamma_0) {
    const std::size_t n = S.grid.size();
    double acc = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) acc += S.grid.weight[a] * S.grid.weight[b] * std::norm(S.S(a, b));
    const double norm = 2.0 * P_emit / Gamma_0;
    IndistResult r;
    r.I = acc / (norm * norm);
    r.delta = 1.0 - r.I;
    r.P_emit = P_emit;
    r.grid_points = int(n);
    return r;
}

// ---- resolvent route -------------------------------------------------------------

// Non-uniform rule on [lo, hi]: base spacing h plus Lorentzian clusters of `per_feature`
// extra nodes at each narrow feature (centre, half-width). Nodes are equispaced in the
// cumulative node density, so the weights are 1/density.
inline FrequencyGrid adapted_grid(double lo, double hi, double h, const std::vector<std::pair<double, double>>& feats,
                                  int per_feature = 32) {
    if (!(hi > lo) || !(h > 0.0)) throw DomainError("adapted_grid: bad range or spacing");
    auto count = [&](double w) {
        double v = (w - lo) / h;
        for (auto [c, g] : feats) v += per_feature / pi * (std::atan((w - c) / g) - std::atan((lo - c) / g));
        return v;
    };
    auto density = [&](double w) {
        double v = 1.0 / h;
        for (auto [c, g] : feats) v += per_feature / pi * g / ((w - c) * (w - c) + g * g);
        return v;
    };
    const int n = int(std::floor(count(hi)));
    FrequencyGrid out;
    out.omega.resize(n);
    out.weight.resize(n);
    double a = lo;
    for (int i = 0; i < n; ++i) {
        const double u = i + 0.5;
        double b = hi;
        // bisection; lower bracket carried over since the nodes are increasing
        for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
            const double m = 0.5 * (a + b);
            (count(m) < u ? a : b) = m;
        }
        out.omega[i] = 0.5 * (a + b);
        out.weight[i] = 1.0 / density(out.omega[i]);
    }
    return out;
}

struct SpectrumSettings {
    double span = 12.0;        // detuning half-range around omega_eg, meV
    double h_base = 0.02;      // base spacing, meV
    int per_feature = 32;      // nodes per narrow line
    double narrow_factor = 20; // a line counts as narrow below narrow_factor * h_base
    int max_points = 6000;
};

// Frequency-domain solution of the regression theorem for the emitter dipole: the
// coherence sector gives Y_x(w), the one-excitation block gives rho_hat(s), and
// S0(w, w') = U(w, w') + U(w', w)^* with U = B0^2 sum_x Y_x(w) rho_hat_x(i(w - w')).
class EmissionModel {
public:
    EmissionModel(const Liouvillian& L, const PhononCorrelations& c) : B2_(c.B0 * c.B0), ref_(L.reference) {
        using basis::idx;
        for (int x = 0; x < 3; ++x)
            for (int y = 0; y < 3; ++y) Lc_(x, y) = L.L(idx(0, x + 1), idx(0, y + 1));
        Eigen::Matrix<cplx, 9, 9> L1;
        for (int p = 0; p < 9; ++p)
            for (int q = 0; q < 9; ++q) L1(p, q) = L.L(blk(p), blk(q));
        damp_decoupled(Lc_);
        damp_decoupled(L1);
        Eigen::ComplexSchur<Eigen::Matrix<cplx, 9, 9>> sch(L1);
        T_ = sch.matrixT();
        Q_ = sch.matrixU();
        v0_ = Q_.adjoint().col(0); // Q^H rho0 with rho0 = |e><e| at block position 0
        for (int x = 0; x < 3; ++x) qrow_[x] = Q_.row(3 * x);

        // phonon part of Y on the tau nodes: w_n (e^{phi_n} - 1) [e^{Lc tau_n}]_{0,x}
        if (!c.trivial()) {
            tau_ = c.tau;
            ph_.resize(c.tau.size());
            for (std::size_t k = 0; k < c.tau.size(); ++k) {
                const Eigen::Matrix3cd E = (Lc_ * c.tau[k]).exp();
                const cplx s = c.w[k] * (std::exp(c.phi[k]) - 1.0);
                ph_[k] = {s * E(0, 0), s * E(0, 1), s * E(0, 2)};
            }
        }
        Eigen::ComplexEigenSolver<Eigen::Matrix3cd> esc(Lc_);
        mu_ = esc.eigenvalues();
        Eigen::ComplexEigenSolver<Eigen::Matrix<cplx, 9, 9>> es1(L1, false);
        for (int k = 0; k < 9; ++k) nu_[k] = es1.eigenvalues()(k);
    }

    double reference() const { return ref_; }
    double B0_squared() const { return B2_; }
    const Eigen::Vector3cd& coherence_rates() const { return mu_; }

    // Y_x(w) split into zero-phonon and phonon parts
    std::array<cplx, 3> Y_zpl(double w) const {
        Eigen::Matrix3cd A = (I1 * w) * Eigen::Matrix3cd::Identity() - Lc_;
        Eigen::Vector3cd r = A.transpose().partialPivLu().solve(Eigen::Vector3cd::Unit(0));
        return {r(0), r(1), r(2)};
    }
    std::array<cplx, 3> Y_phonon(double w) const {
        std::array<cplx, 3> y{0.0, 0.0, 0.0};
        for (std::size_t k = 0; k < tau_.size(); ++k) {
            const cplx e = std::polar(1.0, -w * tau_[k]);
            for (int x = 0; x < 3; ++x) y[x] += e * ph_[k][x];
        }
        return y;
    }

    // rho_hat_x(s) for x = e, mode 1, mode 2 (components rho_{e,x})
    std::array<cplx, 3> rho_hat(cplx s) const {
        Eigen::Matrix<cplx, 9, 1> y = v0_;
        for (int i = 8; i >= 0; --i) {
            cplx acc = y(i);
            for (int j = i + 1; j < 9; ++j) acc += T_(i, j) * y(j);
            y(i) = acc / (s - T_(i, i));
        }
        return {(qrow_[0] * y)(0), (qrow_[1] * y)(0), (qrow_[2] * y)(0)};
    }

    // narrow structures that the frequency rule has to resolve: (centre, half-width)
    std::vector<std::pair<double, double>> narrow_lines(double below) const {
        std::vector<std::pair<double, double>> out;
        for (int k = 0; k < 3; ++k) {
            const double w = -mu_(k).real();
            if (w > 0.0 && w < below) out.push_back({mu_(k).imag(), w});
        }
        return out;
    }
    double slowest_population_rate() const {
        double r = std::numeric_limits<double>::infinity();
        for (auto v : nu_)
            if (-v.real() > 1e-14) r = std::min(r, -v.real());
        return r;
    }

private:
    static int blk(int p) { return basis::idx(p % 3 + 1, p / 3 + 1); }

    // A mode that no term couples to the rest (single-mode cavities) contributes exactly
    // zero, but its undamped eigenvalues make the resolvents singular. Giving the
    // isolated entries a unit decay leaves every coupled component unchanged.
    template <class M>
    static void damp_decoupled(M& A) {
        const int n = int(A.rows());
        std::vector<bool> reach(n, false);
        reach[0] = true;
        for (bool grew = true; grew;) {
            grew = false;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (reach[j] && !reach[i] && (A(i, j) != 0.0 || A(j, i) != 0.0)) reach[i] = grew = true;
        }
        for (int i = 0; i < n; ++i)
            if (!reach[i]) A(i, i) = -1.0;
    }

    double B2_, ref_;
    Eigen::Matrix3cd Lc_;
    Eigen::Matrix<cplx, 9, 9> T_, Q_;
    Eigen::Matrix<cplx, 9, 1> v0_;
    std::array<Eigen::Matrix<cplx, 1, 9>, 3> qrow_;
    std::vector<double> tau_;
    std::vector<std::array<cplx, 3>> ph_;
    Eigen::Vector3cd mu_;
    std::array<cplx, 9> nu_;
};

// Per-node quantities shared by the materialised and streaming evaluations.
struct SpectrumTables {
    FrequencyGrid grid;
    std::vector<std::array<cplx, 3>> Y, Yzpl;
    std::vector<cplx> G;
    bool filtered = false;
};

inline SpectrumTables spectrum_tables(const EmissionModel& m, const FrequencyGrid& grid,
                                      const std::function<cplx(double)>& G) {
    SpectrumTables t;
    t.grid = grid;
    const std::size_t n = grid.size();
    t.Y.resize(n);
    t.Yzpl.resize(n);
    t.G.assign(n, 1.0);
    t.filtered = bool(G);
    for (std::size_t i = 0; i < n; ++i) {
        t.Yzpl[i] = m.Y_zpl(grid.omega[i]);
        const auto yp = m.Y_phonon(grid.omega[i]);
        for (int x = 0; x < 3; ++x) t.Y[i][x] = t.Yzpl[i][x] + yp[x];
        if (G) t.G[i] = G(grid.lab(i));
    }
    return t;
}

namespace detail {
inline cplx u_of(const EmissionModel& m, const std::array<cplx, 3>& y, double wa, double wb) {
    const auto r = m.rho_hat(I1 * (wa - wb));
    return m.B0_squared() * (y[0] * r[0] + y[1] * r[1] + y[2] * r[2]);
}
} // namespace detail

// Unfiltered S0 on `grid`, materialised.
inline Spectrum2D resolvent_spectrum(const EmissionModel& m, const FrequencyGrid& grid) {
    const auto t = spectrum_tables(m, grid, {});
    const std::size_t n = grid.size();
    Eigen::MatrixXcd U(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) U(a, b) = detail::u_of(m, t.Y[a], grid.omega[a], grid.omega[b]);
    Spectrum2D out;
    out.grid = grid;
    out.S = U + U.adjoint();
    return out;
}

struct OneColour {
    FrequencyGrid grid;
    std::vector<double> Sbar;     // filtered one-colour spectrum
    std::vector<double> Sbar_zpl; // contribution of the zero-phonon part of Y
};

inline OneColour one_colour_spectrum(const EmissionModel& m, const SpectrumTables& t) {
    OneColour o;
    o.grid = t.grid;
    const std::size_t n = t.grid.size();
    o.Sbar.resize(n);
    o.Sbar_zpl.resize(n);
    const auto r = m.rho_hat(0.0);
    for (std::size_t a = 0; a < n; ++a) {
        const double g2 = std::norm(t.G[a]);
        cplx u = 0.0, uz = 0.0;
        for (int x = 0; x < 3; ++x) u += t.Y[a][x] * r[x], uz += t.Yzpl[a][x] * r[x];
        o.Sbar[a] = 2.0 * g2 * m.B0_squared() * u.real();
        o.Sbar_zpl[a] = 2.0 * g2 * m.B0_squared() * uz.real();
    }
    return o;
}

// I and P without storing the N x N spectrum.
inline IndistResult streamed_indistinguishability(const EmissionModel& m, const SpectrumTables& t, double Gamma_0) {
    const std::size_t n = t.grid.size();
    const auto& w = t.grid.omega;
    const auto& wt = t.grid.weight;
    double acc = 0.0, diag = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        const double ga = std::norm(t.G[a]);
        for (std::size_t b = a; b < n; ++b) {
            const cplx uab = detail::u_of(m, t.Y[a], w[a], w[b]);
            const cplx uba = a == b ? uab : detail::u_of(m, t.Y[b], w[b], w[a]);
            const cplx s0 = uab + std::conj(uba);
            const double v = wt[a] * wt[b] * ga * std::norm(t.G[b]) * std::norm(s0);
            acc += a == b ? v : 2.0 * v;
            if (a == b) diag += wt[a] * ga * s0.real();
        }
    }
    IndistResult r;
    r.P_emit = 0.5 * Gamma_0 * diag;
    const double norm = diag;
    r.I = acc / (norm * norm);
    r.delta = 1.0 - r.I;
    r.grid_points = int(n);
    return r;
}

// Emitter in a homogeneous medium with total decay Gamma_b: one-colour sideband density per
// unit emitted energy (the zero-phonon line carries the fraction B0^2 on its own).
inline double bulk_sideband_density(const PhononCorrelations& c, double w, double Gamma_b) {
    cplx s = 0.0;
    for (std::size_t k = 0; k < c.tau.size(); ++k)
        s += c.w[k] * std::polar(1.0, -w * c.tau[k]) * (std::exp(c.phi[k]) - 1.0) * std::exp(-0.5 * Gamma_b * c.tau[k]);
    return c.B0 * c.B0 * s.real() / pi;
}

} // namespace fanoqed
