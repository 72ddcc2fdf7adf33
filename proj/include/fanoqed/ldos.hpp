#pragma once

#include <algorithm>

#include "scattering.hpp"

namespace fanoqed {

struct EmitterCoupling {
    double Gamma_0 = 6e-4; // meV
    double Gamma_R = 3e-5; // meV
    double omega_eg = 0.0; // meV, polaron frame

    void validate() const {
        if (!(Gamma_0 > 0.0)) throw DomainError("EmitterCoupling: Gamma_0 must be positive");
        if (!(Gamma_R >= 0.0)) throw DomainError("EmitterCoupling: Gamma_R must be nonnegative");
        if (!(omega_eg > 0.0)) throw DomainError("EmitterCoupling: omega_eg must be positive");
    }
};

struct SpectralCurve {
    std::vector<double> omega;
    std::vector<double> values;
};

namespace detail {
// (1 + r1)(1 + r2)/(1 - r1 r2), the analytic part of the LDOS
template <class Mirror>
cplx ldos_kernel(const Mirror& m, const CavityGeometry& geo, double x, cplx z) {
    const cplx r1 = geo.r_0 * std::exp(I1 * (1.0 + x) * z / geo.fsr);
    const cplx r2 = m.reflectivity(z) * std::exp(I1 * (1.0 - x) * z / geo.fsr);
    return (1.0 + r1) * (1.0 + r2) / (1.0 - r1 * r2);
}
} // namespace detail

template <class Mirror>
double ldos_at(const Mirror& m, const CavityGeometry& geo, const EmitterCoupling& c, double x, double w,
               double floor = default_denominator_floor) {
    if (!(x >= -1.0 && x <= 1.0)) throw DomainError("ldos_at: x_tilde outside [-1,1]");
    if (std::abs(round_trip_denominator(m, geo, w)) < floor)
        throw DegeneracyError("ldos_at: round-trip denominator below floor");
    return c.Gamma_0 * std::real(detail::ldos_kernel(m, geo, x, cplx(w)));
}

template <class Mirror>
double ldos_midpoint(const Mirror& m, const CavityGeometry& geo, const EmitterCoupling& c, double w) {
    return ldos_at(m, geo, c, 0.0, w);
}

inline double fp_ldos(double r, const CavityGeometry& geo, const EmitterCoupling& c, double w) {
    ConstantMirror m{r};
    m.validate();
    return ldos_midpoint(m, geo, c, w);
}

// Analytic continuation of J off the real axis: J(z) = (G0/2)[K(z) + conj K(conj z)].
template <class Mirror>
cplx ldos_continued(const Mirror& m, const CavityGeometry& geo, const EmitterCoupling& c, double x, cplx z) {
    return 0.5 * c.Gamma_0 *
           (detail::ldos_kernel(m, geo, x, z) + std::conj(detail::ldos_kernel(m, geo, x, std::conj(z))));
}

template <class Mirror>
SpectralCurve ldos_curve(const Mirror& m, const CavityGeometry& geo, const EmitterCoupling& c, double x,
                         double lo, double hi, int points) {
    if (points < 2 || !(hi > lo)) throw DomainError("ldos_curve: need points >= 2 and hi > lo");
    SpectralCurve out;
    out.omega = linspace(lo, hi, points);
    out.values.reserve(points);
    for (double w : out.omega) out.values.push_back(ldos_at(m, geo, c, x, w));
    return out;
}

// Maximum/minimum of J on [lo, hi]: dense scan, then golden-section polish.
template <class Mirror>
double ldos_extremum(const Mirror& m, const CavityGeometry& geo, const EmitterCoupling& c, double lo, double hi,
                     bool maximum, int scan = 4001) {
    auto f = [&](double w) {
        const double v = ldos_at(m, geo, c, 0.0, w);
        return maximum ? -v : v;
    };
    const double h = (hi - lo) / (scan - 1);
    int best = 0;
    double fb = f(lo);
    for (int i = 1; i < scan; ++i) {
        const double v = f(lo + i * h);
        if (v < fb) fb = v, best = i;
    }
    double a = lo + std::max(best - 1, 0) * h, b = lo + std::min(best + 1, scan - 1) * h;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && b - a > 1e-12 * (1.0 + std::abs(a)); ++it) {
        if (f1 < f2) {
            b = x2, x2 = x1, f2 = f1;
            x1 = b - gr * (b - a), f1 = f(x1);
        } else {
            a = x1, x1 = x2, f1 = f2;
            x2 = a + gr * (b - a), f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

} // namespace fanoqed
