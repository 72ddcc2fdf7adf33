#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace fanoqed {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I1{0.0, 1.0};

// hbar in meV*ps, only used when printing times in ps
inline constexpr double hbar_meV_ps = 0.65821;
inline constexpr double kB_meV_per_K = 0.08617333262;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// invalid parameters or inputs outside an operation's domain
struct DomainError : Error {
    using Error::Error;
};

// a denominator or matrix became numerically singular
struct DegeneracyError : Error {
    using Error::Error;
};

// an iterative method or quadrature ran out of budget
struct ConvergenceError : Error {
    using Error::Error;
};

// no admissible parameter set exists for the requested computation
struct InfeasibleError : Error {
    using Error::Error;
};

template <class T>
inline constexpr bool is_complex_v = false;
template <class T>
inline constexpr bool is_complex_v<std::complex<T>> = true;

// Gauss-Legendre nodes/weights on [-1, 1] (Newton on P_n)
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 0; k < n; ++k) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k + 1.0) * z * p1 - k * p2) / (k + 1.0);
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

// composite rule: `panels` equal panels of n-point Gauss-Legendre on [a, b]
struct PanelRule {
    std::vector<double> x, w;

    PanelRule() = default;
    PanelRule(double a, double b, int panels, int n = 16) { append(a, b, panels, n); }

    void append(double a, double b, int panels, int n = 16) {
        std::vector<double> gx, gw;
        gauss_legendre(n, gx, gw);
        const double h = (b - a) / panels;
        for (int p = 0; p < panels; ++p) {
            const double lo = a + p * h;
            for (int k = 0; k < n; ++k) {
                x.push_back(lo + 0.5 * h * (gx[k] + 1.0));
                w.push_back(0.5 * h * gw[k]);
            }
        }
    }
    std::size_t size() const { return x.size(); }
};

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

} // namespace fanoqed
