#pragma once

#include <algorithm>
#include <array>
#include <optional>

#include "ldos.hpp"
#include "nelder_mead.hpp"

namespace fanoqed {

// Two coupled lossy modes sharing one reservoir; the emitter couples to mode 1.
struct MappedPair {
    double g = 0.0;
    double omega_1 = 0.0, omega_2 = 0.0;
    double V_0 = 0.0;
    double varphi = 0.0;
    double kappa_1 = 0.0, kappa_2 = 0.0;

    std::array<double, 7> as_array() const { return {g, omega_1, omega_2, V_0, varphi, kappa_1, kappa_2}; }
};

struct ComplexPole {
    cplx z;
    cplx R;
};

// ---- poles of the cavity response ----------------------------------------

struct PoleSearch {
    double half_width = 0.0;      // seeds span centre +- half_width; 0 -> pi*Delta
    int re_seeds = 33;
    std::vector<double> im_seeds = {-1e-3, -1e-2, -0.1, -0.3}; // in units of Delta
    double tol = 1e-12;          // on |1 - r_0 r e^{2iz/Delta}|
    int max_iter = 100;
};

// Newton on the cleared denominator from one seed; nullopt if it does not settle.
template <class Mirror>
std::optional<cplx> refine_pole(const Mirror& m, const CavityGeometry& geo, cplx z, const PoleSearch& ps = {}) {
    for (int it = 0; it < ps.max_iter; ++it) {
        const auto [d, dd] = cleared_denominator(m, geo, z);
        if (!std::isfinite(std::abs(d)) || std::abs(dd) == 0.0) return std::nullopt;
        const cplx step = d / dd;
        z -= step;
        if (std::abs(step) < 1e-14 * (geo.fsr + std::abs(z))) break;
    }
    if (!std::isfinite(std::abs(z))) return std::nullopt;
    if (std::abs(round_trip_denominator(m, geo, z)) > ps.tol * 1e3) return std::nullopt;
    // final polishing steps until the stated residual is met
    for (int it = 0; it < 5 && std::abs(round_trip_denominator(m, geo, z)) > ps.tol; ++it) {
        const auto [d, dd] = cleared_denominator(m, geo, z);
        z -= d / dd;
    }
    if (std::abs(round_trip_denominator(m, geo, z)) > ps.tol) return std::nullopt;
    return z;
}

// All distinct poles reached from a seed lattice around `centre`, sorted by distance to it.
template <class Mirror>
std::vector<cplx> resonance_poles(const Mirror& m, const CavityGeometry& geo, double centre,
                                  const PoleSearch& ps = {}) {
    const double hw = ps.half_width > 0.0 ? ps.half_width : pi * geo.fsr;
    std::vector<cplx> found;
    for (double re : linspace(centre - hw, centre + hw, ps.re_seeds))
        for (double im : ps.im_seeds) {
            auto z = refine_pole(m, geo, cplx(re, im * geo.fsr), ps);
            if (!z || z->imag() >= 0.0) continue;
            const bool dup = std::any_of(found.begin(), found.end(), [&](cplx f) {
                return std::abs(f - *z) < 1e-8 * geo.fsr;
            });
            if (!dup) found.push_back(*z);
        }
    std::stable_sort(found.begin(), found.end(), [&](cplx a, cplx b) {
        return std::abs(a.real() - centre) < std::abs(b.real() - centre);
    });
    return found;
}

// The two Fano-resonance poles (nearest omega_F), ordered by real part: {z_-, z_+}.
template <class Mirror>
std::array<cplx, 2> find_poles(const Mirror& m, const CavityGeometry& geo, double centre,
                               const PoleSearch& ps = {}) {
    auto zs = resonance_poles(m, geo, centre, ps);
    if (zs.size() < 2) throw ConvergenceError("find_poles: fewer than two poles located");
    std::array<cplx, 2> out{zs[0], zs[1]};
    if (out[1].real() < out[0].real()) std::swap(out[0], out[1]);
    if (std::abs(out[1] - out[0]) < 1e-9 * geo.fsr) throw DegeneracyError("find_poles: coincident poles");
    return out;
}

// ---- residues ----------------------------------------------------------------

// (1/2 pi i) times the contour integral on a circle; trapezoid rule in the angle.
template <class F>
cplx contour_sum(F&& f, cplx z, double radius, int n) {
    cplx acc = 0.0;
    for (int k = 0; k < n; ++k) {
        const cplx e = std::polar(1.0, 2.0 * pi * k / n);
        acc += f(z + radius * e) * e;
    }
    return radius * acc / double(n);
}

template <class F>
cplx residue_contour(F&& f, cplx z, double radius, int n = 256, bool check_enclosure = true) {
    if (n < 64) throw DomainError("residue_contour: need at least 64 nodes");
    if (!(radius > 0.0)) throw DomainError("residue_contour: radius must be positive");
    const cplx r = contour_sum(f, z, radius, n);
    if (check_enclosure) {
        const cplx r2 = contour_sum(f, z, 0.5 * radius, n);
        if (std::abs(r - r2) > 1e-6 * std::abs(r))
            throw DegeneracyError("residue_contour: contour does not enclose exactly one pole");
    }
    return r;
}

// Radius that keeps both the partner pole and the mirror-image pole conj(z) outside.
inline double default_contour_radius(const std::array<cplx, 2>& poles, cplx z, double fsr) {
    return std::min({std::abs(poles[1] - poles[0]), pi * fsr, 2.0 * std::abs(z.imag())}) / 4.0;
}

// ---- mapped spectral density -----------------------------------------------

namespace detail {
inline cplx pair_num(const MappedPair& p, cplx w) { return 2.0 * I1 * (w - p.omega_2) - p.kappa_2; }
inline cplx pair_den(const MappedPair& p, cplx w) {
    return 2.0 * (w - p.omega_2) * (w - p.omega_1) + I1 * p.kappa_1 * (w - p.omega_2) +
           I1 * p.kappa_2 * (w - p.omega_1) +
           2.0 * I1 * p.V_0 * std::sqrt(p.kappa_1 * p.kappa_2) * std::cos(p.varphi) - 2.0 * p.V_0 * p.V_0;
}
} // namespace detail

inline double mapped_spectral_density(const MappedPair& p, double w) {
    return 2.0 * p.g * p.g * std::real(detail::pair_num(p, w) / detail::pair_den(p, w));
}

// continuation g^2 [q(z) + conj q(conj z)] of J' = 2 g^2 Re q
inline cplx mapped_spectral_density(const MappedPair& p, cplx z) {
    const cplx q1 = detail::pair_num(p, z) / detail::pair_den(p, z);
    const cplx zc = std::conj(z);
    const cplx q2 = detail::pair_num(p, zc) / detail::pair_den(p, zc);
    return p.g * p.g * (q1 + std::conj(q2));
}

// Roots of the quadratic denominator, ordered by real part.
inline std::array<cplx, 2> mapped_poles(const MappedPair& p) {
    const cplx a = 2.0;
    const cplx b = -2.0 * (p.omega_1 + p.omega_2) + I1 * (p.kappa_1 + p.kappa_2);
    const cplx c = 2.0 * p.omega_1 * p.omega_2 - I1 * p.kappa_1 * p.omega_2 - I1 * p.kappa_2 * p.omega_1 +
                   2.0 * I1 * p.V_0 * std::sqrt(p.kappa_1 * p.kappa_2) * std::cos(p.varphi) -
                   2.0 * p.V_0 * p.V_0;
    // centre-shifted form keeps precision when omega_i are large
    const cplx mid = -b / (2.0 * a);
    const cplx disc = std::sqrt(mid * mid - c / a);
    std::array<cplx, 2> z{mid - disc, mid + disc};
    if (z[1].real() < z[0].real()) std::swap(z[0], z[1]);
    return z;
}

inline std::array<ComplexPole, 2> mapped_residues(const MappedPair& p) {
    const auto z = mapped_poles(p);
    std::array<ComplexPole, 2> out;
    for (int k = 0; k < 2; ++k) {
        const cplx dden = 4.0 * z[k] - 2.0 * (p.omega_1 + p.omega_2) + I1 * (p.kappa_1 + p.kappa_2);
        out[k] = {z[k], p.g * p.g * detail::pair_num(p, z[k]) / dden};
    }
    return out;
}

// ---- constraint solution -----------------------------------------------------

// Pins five of the seven parameters from the poles (z_+, z_-) and residues; the
// free pair (delta_m, kappa_2) selects the rest. nullopt when infeasible.
inline std::optional<MappedPair> constrained_pair(cplx zp, cplx zm, cplx Rp, cplx Rm, double delta_m,
                                                  double kappa_2) {
    const double omega = 0.5 * (zp + zm).real();
    const double ksum = -2.0 * (zp + zm).imag();
    const double k1 = ksum - kappa_2;
    if (!(kappa_2 >= 0.0) || !(k1 >= 0.0)) return std::nullopt;
    const cplx d2 = (zp - zm) * (zp - zm);
    const double v02 = 0.25 * d2.real() + (ksum / 4.0) * (ksum / 4.0) - delta_m * delta_m / 4.0;
    if (v02 < 0.0) return std::nullopt;
    const double v0 = std::sqrt(v02);
    const double lhs = 0.25 * delta_m * (k1 - kappa_2) - 0.25 * d2.imag();
    const double den = std::sqrt(k1 * kappa_2) * v0;
    double c = 1.0;
    if (den < 1e-300 || std::abs(lhs) > 1e300 * den) {
        if (std::abs(lhs) > 1e-12 * (std::abs(d2) + ksum * ksum + 1e-300)) return std::nullopt;
    } else {
        c = lhs / den;
        if (std::abs(c) > 1.0 + 1e-12) return std::nullopt;
        c = std::clamp(c, -1.0, 1.0);
    }
    const double gs = (Rp + Rm).imag();
    if (gs < 0.0) return std::nullopt;
    MappedPair p;
    p.g = std::sqrt(gs);
    p.omega_1 = omega - 0.5 * delta_m;
    p.omega_2 = omega + 0.5 * delta_m;
    p.V_0 = v0;
    p.varphi = std::acos(c);
    p.kappa_1 = k1;
    p.kappa_2 = kappa_2;
    return p;
}

// ---- least-squares fit of the free parameters --------------------------------

struct FitSettings {
    double window_lo = 0.0, window_hi = 0.0; // both 0: Omega -+ pi*Delta/2
    int min_points = 20001;
    int points_per_width = 40;               // per narrowest pole half-width
    int max_points = 400001;
    int grid_kappa = 41;
    int grid_delta = 81;
    int contour_nodes = 256;
    SimplexSettings simplex{};
    PoleSearch poles{};
};

struct FitReport {
    MappedPair pair;
    double epsilon = 0.0;     // meV^3
    double epsilon_rel = 0.0; // epsilon / int J^2
    double window_lo = 0.0, window_hi = 0.0;
    std::array<ComplexPole, 2> targets{}; // {z_-, z_+}
    std::array<cplx, 2> achieved{};
    int evaluations = 0;
    int window_points = 0;

    double relative_l2() const { return std::sqrt(epsilon_rel); }
};

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return s;
}

namespace detail {
inline double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
inline double logit(double s) { return std::log(s / (1.0 - s)); }
} // namespace detail

// Fit the free pair against samples J(omega) given the pole/residue targets {z_-, z_+}.
inline FitReport fit_samples(const std::array<ComplexPole, 2>& t, const SpectralCurve& J,
                             const FitSettings& fs = {}) {
    const cplx zm = t[0].z, zp = t[1].z, Rm = t[0].R, Rp = t[1].R;
    const double ksum = -2.0 * (zp + zm).imag();
    const double lo = J.omega.front(), hi = J.omega.back();
    if (!(zm.real() >= lo && zm.real() <= hi && zp.real() >= lo && zp.real() <= hi))
        throw InfeasibleError("fit: window does not contain both pole frequencies");

    std::vector<double> resid(J.omega.size());
    std::vector<double> J2(J.omega.size());
    for (std::size_t i = 0; i < J2.size(); ++i) J2[i] = J.values[i] * J.values[i];
    const double norm = trapezoid(J.omega, J2);

    auto objective = [&](double dm, double k2) {
        const auto p = constrained_pair(zp, zm, Rp, Rm, dm, k2);
        if (!p) return std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < resid.size(); ++i) {
            const double d = J.values[i] - mapped_spectral_density(*p, J.omega[i]);
            resid[i] = d * d;
        }
        return trapezoid(J.omega, resid);
    };

    // coarse probe: kappa_2 fractions log-spaced towards both ends, delta_m linear and signed
    std::vector<double> fr;
    const int half = fs.grid_kappa / 2;
    for (int i = 0; i < half; ++i) fr.push_back(std::pow(10.0, -4.0 + 4.0 * i / std::max(half - 1, 1)) * 0.5);
    for (int i = half - 1; i >= 0; --i) fr.push_back(1.0 - fr[i]);
    if (fs.grid_kappa % 2) fr.insert(fr.begin() + half, 0.5);
    const double span = 2.0 * std::abs((zp - zm).real()) + ksum;
    const auto dms = linspace(-span, span, fs.grid_delta);

    double best = std::numeric_limits<double>::infinity();
    std::array<double, 2> x0{0.0, 0.0};
    for (double s : fr)
        for (double dm : dms) {
            const double v = objective(dm, s * ksum);
            if (v < best) best = v, x0 = {dm, detail::logit(s)};
        }
    if (!std::isfinite(best)) throw InfeasibleError("fit: no feasible point on the search grid");

    auto res = nelder_mead<2>([&](const std::array<double, 2>& x) {
        return objective(x[0], ksum * detail::logistic(x[1]));
    }, x0, fs.simplex);
    // restart once from the optimum to shake off a collapsed simplex
    auto res2 = nelder_mead<2>([&](const std::array<double, 2>& x) {
        return objective(x[0], ksum * detail::logistic(x[1]));
    }, res.x, fs.simplex);
    if (res2.f <= res.f) res2.evals += res.evals, res = res2;

    FitReport rep;
    rep.pair = *constrained_pair(zp, zm, Rp, Rm, res.x[0], ksum * detail::logistic(res.x[1]));
    rep.epsilon = res.f;
    rep.epsilon_rel = res.f / norm;
    rep.window_lo = lo;
    rep.window_hi = hi;
    rep.targets = t;
    rep.achieved = mapped_poles(rep.pair);
    rep.evaluations = res.evals + fs.grid_kappa * fs.grid_delta;
    rep.window_points = int(J.omega.size());
    return rep;
}

// Poles and contour residues of the cavity LDOS around `centre` (normally omega_F).
template <class Mirror>
std::array<ComplexPole, 2> ldos_pole_targets(const Mirror& m, const CavityGeometry& geo, const EmitterCoupling& c,
                                             double centre, const FitSettings& fs = {}) {
    const auto z = find_poles(m, geo, centre, fs.poles);
    auto Jc = [&](cplx w) { return ldos_continued(m, geo, c, geo.x_tilde, w); };
    std::array<ComplexPole, 2> t;
    for (int k = 0; k < 2; ++k)
        t[k] = {z[k], residue_contour(Jc, z[k], default_contour_radius(z, z[k], geo.fsr), fs.contour_nodes)};
    return t;
}

template <class Mirror>
FitReport fit(const Mirror& m, const CavityGeometry& geo, const EmitterCoupling& c, double centre,
              const FitSettings& fs = {}) {
    const auto t = ldos_pole_targets(m, geo, c, centre, fs);
    const double omega = 0.5 * (t[0].z + t[1].z).real();
    double lo = fs.window_lo, hi = fs.window_hi;
    if (lo == 0.0 && hi == 0.0) lo = omega - 0.5 * pi * geo.fsr, hi = omega + 0.5 * pi * geo.fsr;
    if (!(hi > lo)) throw DomainError("fit: empty window");
    const double narrow = std::min(std::abs(t[0].z.imag()), std::abs(t[1].z.imag()));
    const double want = fs.points_per_width * (hi - lo) / std::max(narrow, 1e-300);
    const int n = int(std::clamp(want, double(fs.min_points), double(fs.max_points)));
    SpectralCurve J;
    J.omega = linspace(lo, hi, n);
    J.values.reserve(n);
    for (double w : J.omega) J.values.push_back(ldos_at(m, geo, c, geo.x_tilde, w));
    return fit_samples(t, J, fs);
}

} // namespace fanoqed
