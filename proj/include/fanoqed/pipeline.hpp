#pragma once

#include <atomic>
#include <thread>

#include "observables.hpp"

namespace fanoqed {

struct PipelineSettings {
    FitSettings fit{};
    SpectrumSettings spectrum{};
    CorrelationSettings correlations{};
    int trajectory_samples = 200;
};

// Frequency rule for one emitter/cavity configuration: base spacing plus clusters on the
// emitter-like lines of the generator and on sharp resonances of the filter.
inline FrequencyGrid spectrum_grid(const EmissionModel& m, const SpectrumSettings& s,
                                   const std::vector<cplx>& filter_poles = {}) {
    const double below = s.narrow_factor * s.h_base;
    auto feats = m.narrow_lines(below);
    for (cplx z : filter_poles) {
        const double c = z.real() - m.reference(), w = std::abs(z.imag());
        if (w < below && std::abs(c) < s.span) feats.push_back({c, w});
    }
    auto g = adapted_grid(-s.span, s.span, s.h_base, feats, s.per_feature);
    if (int(g.size()) > s.max_points) {
        // coarsen the base spacing to respect the point budget
        const double extra = double(g.size()) - 2.0 * s.span / s.h_base;
        const double h = 2.0 * s.span / std::max(double(s.max_points) - extra, 0.1 * s.max_points);
        g = adapted_grid(-s.span, s.span, h, feats, s.per_feature);
    }
    g.reference = m.reference();
    return g;
}

// Emission through a cavity described by `pair` and output filter G.
inline IndistResult emission_indistinguishability(const MappedPair& pair, const EmitterCoupling& em,
                                                  const PhononCorrelations& corr, const std::function<cplx(double)>& G,
                                                  const std::vector<cplx>& filter_poles, const PipelineSettings& s,
                                                  OneColour* spectrum_out = nullptr) {
    const auto L = make_liouvillian(pair, em, corr);
    EmissionModel model(L, corr);
    const auto grid = spectrum_grid(model, s.spectrum, filter_poles);
    const auto tables = spectrum_tables(model, grid, G);
    auto r = streamed_indistinguishability(model, tables, em.Gamma_0);
    r.grid_spacing = s.spectrum.h_base;
    r.tau_max = corr.tau_max;
    r.tau_truncated = corr.truncated;
    r.trajectory = check_trajectory(L, excited_state(), s.trajectory_samples);
    if (spectrum_out) *spectrum_out = one_colour_spectrum(model, tables);
    return r;
}

inline IndistResult fano_point(const FanoMirror& mirror, const CavityGeometry& geo, const EmitterCoupling& em,
                               const PhononCorrelations& corr, const FitReport& fit, const PipelineSettings& s,
                               OneColour* spectrum_out = nullptr) {
    auto G = [&](double w) { return green_function(mirror, geo, w); };
    const std::vector<cplx> poles{fit.targets[0].z, fit.targets[1].z};
    return emission_indistinguishability(fit.pair, em, corr, G, poles, s, spectrum_out);
}

// Single cavity mode of an ordinary Fabry-Perot cavity, taken from the pole nearest `near`.
inline MappedPair fp_single_mode(double r, const CavityGeometry& geo, const EmitterCoupling& em, double near,
                                 const PoleSearch& ps = {}) {
    ConstantMirror m{r};
    m.validate();
    if (!(r > 0.0 && r < 1.0)) throw DomainError("fp_single_mode: need 0 < r < 1");
    PoleSearch narrow = ps;
    narrow.half_width = 0.5 * pi * geo.fsr;
    const auto zs = resonance_poles(m, geo, near, narrow);
    if (zs.empty()) throw ConvergenceError("fp_single_mode: no pole found");
    const cplx z = zs.front();
    auto Jc = [&](cplx w) { return ldos_continued(m, geo, em, 0.0, w); };
    const double rad = std::min(pi * geo.fsr, 2.0 * std::abs(z.imag())) / 4.0;
    const cplx R = residue_contour(Jc, z, rad);
    MappedPair p;
    p.g = std::sqrt(std::max(R.imag(), 0.0));
    p.omega_1 = p.omega_2 = z.real();
    p.kappa_1 = -2.0 * z.imag();
    return p;
}

// FP resonance closest to w (r_0 = -1 places them at (n + 1/2) pi Delta)
inline double fp_resonance_near(double r, const CavityGeometry& geo, double w) {
    return fp_single_mode(r, geo, EmitterCoupling{1.0, 0.0, w}, w).omega_1;
}

inline IndistResult fp_baseline(double r, const CavityGeometry& geo, const EmitterCoupling& em,
                                const PhononCorrelations& corr, const PipelineSettings& s, double mode_near,
                                OneColour* spectrum_out = nullptr) {
    const auto pair = fp_single_mode(r, geo, em, mode_near, s.fit.poles);
    auto G = [&](double w) { return fp_green_function(r, geo, w); };
    const std::vector<cplx> poles{cplx(pair.omega_1, -0.5 * pair.kappa_1)};
    return emission_indistinguishability(pair, em, corr, G, poles, s, spectrum_out);
}

// ---- sweeps ---------------------------------------------------------------------------

struct SweepPoint {
    double omega_eg = 0.0;
    double axis2 = 0.0; // gamma_F (meV) for Fano sweeps, r for FP sweeps
    bool on_trace = false;
    IndistResult result;
    std::string status = "pending";
    bool ok() const { return status == "ok"; }
};

struct TraceRow {
    double gamma_F = 0.0;
    double omega_peak = 0.0, omega_dip = 0.0;
    FitReport fit;
    std::string status = "ok";
};

struct SweepResult {
    std::vector<SweepPoint> points;
    std::vector<TraceRow> trace;

    const SweepPoint* best() const {
        const SweepPoint* b = nullptr;
        for (const auto& p : points)
            if (p.ok() && (!b || p.result.delta < b->result.delta)) b = &p;
        return b;
    }
};

// Run `task(i)` for i in [0, n) on a pool of `threads` workers; results go by index.
template <class F>
void parallel_for(std::size_t n, int threads, F&& task) {
    threads = std::max(1, threads);
    if (threads == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) task(i);
        });
    for (auto& th : pool) th.join();
}

inline std::string failure_status(const std::exception& e) {
    if (dynamic_cast<const InfeasibleError*>(&e)) return "infeasible";
    if (dynamic_cast<const DegeneracyError*>(&e)) return "degenerate";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "no_convergence";
    return "error";
}

inline void finish_point(SweepPoint& p) {
    const auto& r = p.result;
    if (!std::isfinite(r.I)) p.status = "nan";
    else if (!r.trajectory.conserving()) p.status = "sanity";
    else p.status = "ok";
}

struct FanoSweepSpec {
    FanoMirror mirror;      // gamma_1 = gamma_2 overwritten per row
    std::vector<double> omega_eg;
    std::vector<double> gamma_F;
    bool trace_points = true; // also evaluate the LDOS-peak frequency of every row
};

inline SweepResult fano_sweep(const FanoSweepSpec& spec, const CavityGeometry& geo, const EmitterCoupling& em0,
                              const PhononCorrelations& corr, const PipelineSettings& s, int threads = 1) {
    SweepResult out;
    // fits depend only on gamma_F: one per row, before the emitter points
    out.trace.resize(spec.gamma_F.size());
    parallel_for(spec.gamma_F.size(), threads, [&](std::size_t k) {
        auto& row = out.trace[k];
        row.gamma_F = spec.gamma_F[k];
        FanoMirror m = spec.mirror;
        m.gamma_1 = m.gamma_2 = row.gamma_F;
        try {
            row.fit = fit(m, geo, em0, m.omega_F, s.fit);
            const double lo = row.fit.window_lo, hi = row.fit.window_hi;
            row.omega_peak = ldos_extremum(m, geo, em0, lo, hi, true);
            // anti-resonance: the LDOS minimum between the two poles' neighbourhood
            const double zl = row.fit.targets[0].z.real(), zh = row.fit.targets[1].z.real();
            const double pad = 0.5 * (zh - zl);
            row.omega_dip = ldos_extremum(m, geo, em0, std::max(lo, zl - pad), std::min(hi, zh + pad), false);
        } catch (const std::exception& e) {
            row.status = failure_status(e);
        }
    });

    for (std::size_t k = 0; k < spec.gamma_F.size(); ++k) {
        for (double w : spec.omega_eg) out.points.push_back({w, spec.gamma_F[k], false, {}, "pending"});
        if (spec.trace_points) out.points.push_back({out.trace[k].omega_peak, spec.gamma_F[k], true, {}, "pending"});
    }
    parallel_for(out.points.size(), threads, [&](std::size_t i) {
        auto& p = out.points[i];
        const std::size_t k = std::size_t(std::find(spec.gamma_F.begin(), spec.gamma_F.end(), p.axis2) -
                                          spec.gamma_F.begin());
        const auto& row = out.trace[k];
        if (row.status != "ok") {
            p.status = row.status;
            return;
        }
        FanoMirror m = spec.mirror;
        m.gamma_1 = m.gamma_2 = row.gamma_F;
        EmitterCoupling em = em0;
        em.omega_eg = p.omega_eg;
        try {
            p.result = fano_point(m, geo, em, corr, row.fit, s);
            finish_point(p);
        } catch (const std::exception& e) {
            p.status = failure_status(e);
        }
    });
    return out;
}

struct FpSweepSpec {
    std::vector<double> detuning; // omega_eg relative to the FP resonance next to `reference`
    std::vector<double> r;
    double reference = 0.0;
};

inline SweepResult fp_sweep(const FpSweepSpec& spec, const CavityGeometry& geo, const EmitterCoupling& em0,
                            const PhononCorrelations& corr, const PipelineSettings& s, int threads = 1) {
    SweepResult out;
    for (double r : spec.r)
        for (double d : spec.detuning) out.points.push_back({d, r, false, {}, "pending"});
    parallel_for(out.points.size(), threads, [&](std::size_t i) {
        auto& p = out.points[i];
        try {
            const auto mode = fp_single_mode(p.axis2, geo, em0, spec.reference, s.fit.poles);
            EmitterCoupling em = em0;
            em.omega_eg = mode.omega_1 + p.omega_eg;
            p.omega_eg = em.omega_eg;
            p.result = fp_baseline(p.axis2, geo, em, corr, s, mode.omega_1);
            finish_point(p);
        } catch (const std::exception& e) {
            p.status = failure_status(e);
        }
    });
    return out;
}

} // namespace fanoqed
