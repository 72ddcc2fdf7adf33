#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace fanoqed {

struct SimplexSettings {
    double initial_step = 0.05; // relative to |x0| (absolute if x0 == 0)
    double x_tol = 1e-11;
    double f_tol = 1e-14; // relative to the best value, so exact fits run on to x_tol
    int max_evals = 4000;
    std::uint64_t seed = 0; // 0: axis-aligned start; otherwise a seeded rotation of the start simplex
};

template <std::size_t N>
struct SimplexResult {
    std::array<double, N> x;
    double f;
    int evals;
    bool converged;
};

// Downhill simplex with the standard reflection/expansion/contraction/shrink steps.
// +inf objective values are allowed and simply lose every comparison.
template <std::size_t N, class F>
SimplexResult<N> nelder_mead(F&& f, std::array<double, N> x0, const SimplexSettings& s = {}) {
    using Pt = std::array<double, N>;
    std::array<Pt, N + 1> p;
    std::array<double, N + 1> fv;
    p.fill(x0);

    std::array<std::array<double, N>, N> dirs{};
    for (std::size_t i = 0; i < N; ++i) dirs[i][i] = 1.0;
    if (s.seed != 0) {
        // random orthonormal frame (Gram-Schmidt on Gaussian vectors)
        std::mt19937_64 rng(s.seed);
        std::normal_distribution<double> nd;
        for (std::size_t i = 0; i < N; ++i) {
            for (auto& v : dirs[i]) v = nd(rng);
            for (std::size_t j = 0; j < i; ++j) {
                double d = 0;
                for (std::size_t k = 0; k < N; ++k) d += dirs[i][k] * dirs[j][k];
                for (std::size_t k = 0; k < N; ++k) dirs[i][k] -= d * dirs[j][k];
            }
            double n = 0;
            for (auto v : dirs[i]) n += v * v;
            for (auto& v : dirs[i]) v /= std::sqrt(n);
        }
    }
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k < N; ++k) {
            const double scale = x0[k] != 0.0 ? std::abs(x0[k]) * s.initial_step : s.initial_step;
            p[i + 1][k] += scale * dirs[i][k];
        }

    int evals = 0;
    auto eval = [&](const Pt& x) {
        ++evals;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    for (std::size_t i = 0; i <= N; ++i) fv[i] = eval(p[i]);

    std::array<std::size_t, N + 1> order;
    bool converged = false;
    while (evals < s.max_evals) {
        for (std::size_t i = 0; i <= N; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
        const std::size_t lo = order[0], hi = order[N], nh = order[N - 1];

        double xspread = 0.0;
        for (std::size_t i = 0; i <= N; ++i)
            for (std::size_t k = 0; k < N; ++k)
                xspread = std::max(xspread, std::abs(p[i][k] - p[lo][k]) / (1.0 + std::abs(p[lo][k])));
        const double fspread = std::abs(fv[hi] - fv[lo]);
        if (xspread < s.x_tol || (std::isfinite(fv[hi]) && fspread <= s.f_tol * std::abs(fv[lo]))) {
            converged = true;
            break;
        }

        Pt c{};
        for (std::size_t i = 0; i <= N; ++i)
            if (i != hi)
                for (std::size_t k = 0; k < N; ++k) c[k] += p[i][k] / N;
        auto along = [&](double t) {
            Pt x;
            for (std::size_t k = 0; k < N; ++k) x[k] = c[k] + t * (p[hi][k] - c[k]);
            return x;
        };

        Pt xr = along(-1.0);
        const double fr = eval(xr);
        if (fr < fv[lo]) {
            Pt xe = along(-2.0);
            const double fe = eval(xe);
            if (fe < fr) p[hi] = xe, fv[hi] = fe;
            else p[hi] = xr, fv[hi] = fr;
            continue;
        }
        if (fr < fv[nh]) {
            p[hi] = xr, fv[hi] = fr;
            continue;
        }
        const bool outside = fr < fv[hi];
        Pt xc = along(outside ? -0.5 : 0.5);
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[hi])) {
            p[hi] = xc, fv[hi] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= N; ++i) {
            if (i == lo) continue;
            for (std::size_t k = 0; k < N; ++k) p[i][k] = p[lo][k] + 0.5 * (p[i][k] - p[lo][k]);
            fv[i] = eval(p[i]);
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= N; ++i)
        if (fv[i] < fv[best]) best = i;
    return {p[best], fv[best], evals, converged};
}

} // namespace fanoqed
