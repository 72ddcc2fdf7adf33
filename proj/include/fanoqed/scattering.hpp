#pragma once

#include "core.hpp"

namespace fanoqed {

struct MirrorPhases {
    cplx e2i_theta1;   // e^{2 i theta_1}
    cplx phase_factor; // e^{i (theta_1 - theta_2)}
    double theta_1() const { return 0.5 * std::arg(e2i_theta1); }
};

// Phase relations of a lossless partially transmitting element side-coupled
// to a nanocavity; chi = gamma_2 / gamma_1.
inline MirrorPhases mirror_phases(double r_B, int parity, double chi) {
    if (r_B == 0.0) throw DomainError("mirror_phases: r_B must be nonzero");
    if (std::abs(r_B) > 1.0) throw DomainError("mirror_phases: |r_B| > 1");
    if (!(chi > 0.0)) throw DomainError("mirror_phases: chi must be positive");
    const double t_B = std::sqrt(1.0 - r_B * r_B);
    const double arg = 4.0 * chi - t_B * t_B * (1.0 + chi) * (1.0 + chi);
    if (arg < -1e-14) throw DomainError("mirror_phases: no real phase for this asymmetry ratio");
    // sign(r_B) on the root makes chi = 1 reduce to sin 2theta_1 = P t_B
    const double s = std::copysign(std::sqrt(std::max(arg, 0.0)), r_B);
    const double c2 = 0.5 * t_B * t_B / r_B * (chi - 1.0) - r_B;
    const double s2 = parity * t_B * s / (2.0 * r_B);
    const cplx e2{c2, s2};
    const cplx pf = std::sqrt(1.0 / chi) * (e2 + r_B) / (I1 * t_B);
    return {e2, pf};
}

struct FanoMirror {
    double r_B = -1.0 / std::numbers::sqrt2;
    int parity = 1;
    double gamma_1 = 1.5; // meV
    double gamma_2 = 1.5; // meV
    double gamma_0 = 0.01;
    double omega_F = 0.0;

    static FanoMirror symmetric(double r_B, int parity, double gamma_F, double gamma_0, double omega_F) {
        return {r_B, parity, gamma_F, gamma_F, gamma_0, omega_F};
    }

    double t_B() const { return std::sqrt(1.0 - r_B * r_B); }
    double chi() const { return gamma_2 / gamma_1; }
    double gamma_t() const { return gamma_1 + gamma_2 + gamma_0; }

    void validate() const {
        if (!(std::abs(r_B) <= 1.0) || r_B == 0.0) throw DomainError("FanoMirror: r_B must be in [-1,1] and nonzero");
        if (parity != 1 && parity != -1) throw DomainError("FanoMirror: parity must be +1 or -1");
        if (!(gamma_1 > 0.0) || !(gamma_2 > 0.0)) throw DomainError("FanoMirror: gamma_1, gamma_2 must be positive");
        if (!(gamma_0 >= 0.0)) throw DomainError("FanoMirror: gamma_0 must be nonnegative");
        if (!std::isfinite(omega_F)) throw DomainError("FanoMirror: omega_F not finite");
    }

    MirrorPhases phases() const { return mirror_phases(r_B, parity, chi()); }

    // r_F = num/den with den = -i(w - w_F) + gamma_t; both entire in w
    template <class T>
    cplx den(T w) const { return -I1 * (cplx(w) - omega_F) + gamma_t(); }
    template <class T>
    cplx refl_num(T w, const MirrorPhases& ph) const {
        return r_B * den(w) + 2.0 * gamma_1 * ph.e2i_theta1;
    }

    template <class T>
    cplx reflectivity(T w) const {
        const auto ph = phases();
        return r_B + 2.0 * gamma_1 * ph.e2i_theta1 / den(w);
    }
    template <class T>
    cplx transmittivity(T w) const {
        const auto ph = phases();
        return -I1 * t_B() + 2.0 * std::sqrt(gamma_1 * gamma_2) * ph.e2i_theta1 * std::conj(ph.phase_factor) / den(w);
    }
};

// Frequency-independent mirror: the right mirror of an ordinary Fabry-Perot cavity.
struct ConstantMirror {
    double r = 0.99;

    void validate() const {
        if (!(r >= 0.0 && r <= 1.0)) throw DomainError("ConstantMirror: r must lie in [0,1]");
    }
    template <class T>
    cplx den(T) const { return 1.0; }
    template <class T>
    cplx reflectivity(T) const { return r; }
    template <class T>
    cplx transmittivity(T) const { return std::sqrt(1.0 - r * r); }
};

template <class T>
inline cplx fano_reflectivity(const FanoMirror& m, T w) { return m.reflectivity(w); }
template <class T>
inline cplx fano_transmittivity(const FanoMirror& m, T w) { return m.transmittivity(w); }

struct CavityGeometry {
    double fsr = 10.0;   // Delta, meV
    cplx r_0 = -1.0;     // left mirror
    double x_tilde = 0.0;

    double phi_1() const { return std::arg(r_0); }

    void validate() const {
        if (!(fsr > 0.0)) throw DomainError("CavityGeometry: fsr must be positive");
        if (!(std::abs(r_0) <= 1.0)) throw DomainError("CavityGeometry: |r_0| must be <= 1");
        if (!(x_tilde >= -1.0 && x_tilde <= 1.0)) throw DomainError("CavityGeometry: x_tilde outside [-1,1]");
    }
};

inline constexpr double default_denominator_floor = 1e-14;

// Round-trip denominator 1 - r_0 r(w) e^{2iw/Delta}
template <class Mirror, class T>
cplx round_trip_denominator(const Mirror& m, const CavityGeometry& geo, T w) {
    return 1.0 - geo.r_0 * m.reflectivity(w) * std::exp(2.0 * I1 * cplx(w) / geo.fsr);
}

// The same denominator multiplied by the mirror's own denominator; entire in w,
// so Newton iterations cannot be thrown off by the nanocavity pole.
template <class Mirror>
std::pair<cplx, cplx> cleared_denominator(const Mirror& m, const CavityGeometry& geo, cplx z) {
    const cplx E = std::exp(2.0 * I1 * z / geo.fsr);
    const cplx dE = 2.0 * I1 / geo.fsr * E;
    if constexpr (std::is_same_v<Mirror, FanoMirror>) {
        const auto ph = m.phases();
        const cplx den = m.den(z);
        const cplx num = m.refl_num(z, ph);
        const cplx dden = -I1;
        const cplx dnum = m.r_B * dden;
        return {den - geo.r_0 * E * num, dden - geo.r_0 * (dE * num + E * dnum)};
    } else {
        const cplx r = m.reflectivity(z);
        return {1.0 - geo.r_0 * r * E, -geo.r_0 * r * dE};
    }
}

// Optical Green's function from the emitter (cavity centre) to the output port.
template <class Mirror>
cplx green_function(const Mirror& m, const CavityGeometry& geo, double w,
                    double floor = default_denominator_floor) {
    const cplx e = std::exp(I1 * w / geo.fsr);
    const cplx d = 1.0 - geo.r_0 * m.reflectivity(w) * e * e;
    if (std::abs(d) < floor) throw DegeneracyError("green_function: round-trip denominator below floor");
    return (1.0 + geo.r_0 * e) * m.transmittivity(w) / d;
}

inline cplx fp_green_function(double r, const CavityGeometry& geo, double w,
                              double floor = default_denominator_floor) {
    ConstantMirror m{r};
    m.validate();
    return green_function(m, geo, w, floor);
}

} // namespace fanoqed
