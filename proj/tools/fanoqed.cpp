#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include <fanoqed/config.hpp>

namespace fs = std::filesystem;
using namespace fanoqed;

namespace {

enum Exit { ok = 0, usage = 2, infeasible = 3, numerical = 4 };

struct Common {
    std::string config;
    std::string out = ".";
    int threads = 1;
    std::uint64_t seed = 0;
};

struct LdosFlags {
    std::optional<double> position;
    std::vector<double> range;
    std::optional<int> points;
    std::vector<double> gamma_range;
    std::optional<double> fp_r;
};

struct SpectrumFlags {
    bool at_peak = false, at_dip = false, dump_phonons = false;
};

struct Run {
    SimConfig cfg;
    std::string hash;
    fs::path out;
    int threads = 1;

    std::string path(const char* name) const { return (out / name).string(); }

    void write_json(const char* name, nlohmann::json j) const {
        j["config_hash"] = hash;
        j["schema"] = config_schema;
        std::ofstream f(path(name));
        if (!f) throw Error(std::string("cannot write '") + path(name) + "'");
        f << j.dump(2) << "\n";
    }
};

Run prepare(const Common& c, const std::function<void(nlohmann::json&)>& overrides) {
    std::ifstream in(c.config);
    if (!in) throw ConfigError("cannot open config file '" + c.config + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(c.config + ": " + e.what());
    }
    if (overrides) overrides(j);
    Run r;
    r.cfg = parse_config(j);
    r.cfg.settings.fit.simplex.seed = c.seed;
    // the seed changes results, so it is part of the provenance
    nlohmann::json prov = j;
    prov["_seed"] = c.seed;
    r.hash = config_hash(prov);
    if (c.threads < 1) throw ConfigError("--threads must be at least 1");
    r.threads = c.threads;
    r.out = c.out;
    fs::create_directories(r.out);
    return r;
}

PhononCorrelations correlations(const Run& r) { return phonon_correlations(r.cfg.phonons, r.cfg.settings.correlations); }

void write_spectrum(const Run& r, const char* name, const OneColour& s) {
    const double peak = *std::max_element(s.Sbar.begin(), s.Sbar.end());
    CsvWriter csv(r.path(name), r.hash, "omega_meV,Sbar_norm");
    for (std::size_t i = 0; i < s.grid.size(); ++i) csv.row(s.grid.lab(i), peak > 0.0 ? s.Sbar[i] / peak : 0.0);
}

nlohmann::json sanity(const SweepResult& res) {
    TrajectoryCheck all;
    for (const auto& p : res.points)
        if (p.result.trajectory.samples > 0) all.merge(p.result.trajectory);
    return {{"trace_dev", all.max_trace_dev}, {"herm_dev", all.max_herm_dev}, {"min_eig", all.min_eig},
            {"samples", all.samples}};
}

nlohmann::json summary(const IndistResult& res) {
    auto j = to_json(res);
    for (int n = 2; n <= 4; ++n) j["visibility_n" + std::to_string(n)] = 1.0 - n * res.delta;
    return j;
}

void dump_phonons(const Run& r, const PhononCorrelations& c) {
    const std::pair<const char*, const std::vector<cplx>*> tables[] = {
        {"phonon_phi.csv", &c.phi}, {"phonon_lambda_x.csv", &c.LX}, {"phonon_lambda_y.csv", &c.LY}};
    for (auto [name, v] : tables) {
        CsvWriter csv(r.path(name), r.hash, "tau_ps,re,im");
        for (std::size_t k = 0; k < c.tau.size(); ++k) csv.row(c.tau[k] * hbar_meV_ps, (*v)[k].real(), (*v)[k].imag());
    }
}

// ---- subcommands ----------------------------------------------------------------------

int cmd_ldos(const Common& c, const LdosFlags& f) {
    if (f.points && *f.points < 2) throw ConfigError("--points must be at least 2");
    auto r = prepare(c, [&](nlohmann::json& j) {
        if (f.position) j["geometry"]["x_tilde"] = *f.position;
        if (!f.range.empty()) j["ldos"]["range"] = f.range;
        if (f.points) j["ldos"]["points"] = *f.points;
        if (f.fp_r) j["ldos"]["fp_r"] = *f.fp_r;
        if (!f.gamma_range.empty()) {
            if (f.gamma_range.size() != 3) throw ConfigError("--gammaF-range expects FROM TO POINTS");
            j["ldos"]["gamma_F"] = {{"from", f.gamma_range[0]}, {"to", f.gamma_range[1]},
                                    {"points", int(f.gamma_range[2])}};
        }
    });
    const auto& cfg = r.cfg;
    double lo = cfg.ldos_lo, hi = cfg.ldos_hi;
    if (lo == 0.0 && hi == 0.0) lo = cfg.mirror.omega_F - 0.5 * pi * cfg.geometry.fsr, hi = lo + pi * cfg.geometry.fsr;
    if (!(hi > lo) || cfg.ldos_points < 2) throw ConfigError("ldos: need range hi > lo and at least 2 points");
    const double G0 = cfg.emitter.Gamma_0;

    if (cfg.ldos_gamma_F) {
        CsvWriter csv(r.path("ldos_map.csv"), r.hash, "gammaF_meV,omega_meV,J_over_Gamma0");
        for (double gF : cfg.ldos_gamma_F->values()) {
            FanoMirror m = cfg.mirror;
            m.gamma_1 = m.gamma_2 = gF;
            const auto curve = ldos_curve(m, cfg.geometry, cfg.emitter, cfg.geometry.x_tilde, lo, hi, cfg.ldos_points);
            for (std::size_t i = 0; i < curve.omega.size(); ++i) csv.row(gF, curve.omega[i], curve.values[i] / G0);
        }
        return ok;
    }
    SpectralCurve curve;
    if (cfg.ldos_fp_r) {
        ConstantMirror m{*cfg.ldos_fp_r};
        m.validate();
        curve = ldos_curve(m, cfg.geometry, cfg.emitter, cfg.geometry.x_tilde, lo, hi, cfg.ldos_points);
    } else {
        curve = ldos_curve(cfg.mirror, cfg.geometry, cfg.emitter, cfg.geometry.x_tilde, lo, hi, cfg.ldos_points);
    }
    CsvWriter csv(r.path("ldos.csv"), r.hash, "omega_meV,J_over_Gamma0");
    for (std::size_t i = 0; i < curve.omega.size(); ++i) csv.row(curve.omega[i], curve.values[i] / G0);
    return ok;
}

int cmd_fit(const Common& c) {
    auto r = prepare(c, {});
    const auto& cfg = r.cfg;
    const auto rep = fit(cfg.mirror, cfg.geometry, cfg.emitter, cfg.mirror.omega_F, cfg.settings.fit);
    auto j = to_json(rep);
    j["relative_l2"] = rep.relative_l2();
    r.write_json("fit.json", j);

    const double G0 = cfg.emitter.Gamma_0;
    CsvWriter csv(r.path("fit_overlay.csv"), r.hash, "omega_meV,J_over_Gamma0,Jmapped_over_Gamma0");
    for (double w : linspace(rep.window_lo, rep.window_hi, 4001))
        csv.row(w, ldos_at(cfg.mirror, cfg.geometry, cfg.emitter, cfg.geometry.x_tilde, w) / G0,
                mapped_spectral_density(rep.pair, w) / G0);
    std::cout << "epsilon_rel " << rep.epsilon_rel << "  relative_l2 " << rep.relative_l2() << "\n";
    return ok;
}

int cmd_spectrum(const Common& c, const SpectrumFlags& f) {
    if (f.at_peak && f.at_dip) throw ConfigError("--at-peak and --at-dip are exclusive");
    auto r = prepare(c, [&](nlohmann::json& j) {
        if (f.at_peak) j["emitter"]["omega_eg"] = "ldos_peak";
        if (f.at_dip) j["emitter"]["omega_eg"] = "ldos_dip";
    });
    const auto& cfg = r.cfg;
    const auto corr = correlations(r);
    if (f.dump_phonons) dump_phonons(r, corr);
    const auto rep = fit(cfg.mirror, cfg.geometry, cfg.emitter, cfg.mirror.omega_F, cfg.settings.fit);
    EmitterCoupling em = cfg.emitter;
    if (cfg.placement == "ldos_peak") {
        em.omega_eg = ldos_extremum(cfg.mirror, cfg.geometry, em, rep.window_lo, rep.window_hi, true);
    } else if (cfg.placement == "ldos_dip") {
        const double zl = rep.targets[0].z.real(), zh = rep.targets[1].z.real(), pad = 0.5 * (zh - zl);
        em.omega_eg = ldos_extremum(cfg.mirror, cfg.geometry, em, std::max(rep.window_lo, zl - pad),
                                    std::min(rep.window_hi, zh + pad), false);
    }
    if (!(em.omega_eg > 0.0)) throw ConfigError("emitter.omega_eg must be positive");
    OneColour spec;
    const auto res = fano_point(cfg.mirror, cfg.geometry, em, corr, rep, cfg.settings, &spec);
    write_spectrum(r, "spectrum.csv", spec);
    auto j = summary(res);
    j["omega_eg"] = em.omega_eg;
    j["fit"] = to_json(rep);
    r.write_json("spectrum_summary.json", j);
    std::cout << "I " << res.I << "  delta " << res.delta << "  P_emit " << res.P_emit << "\n";
    return std::isfinite(res.I) ? ok : numerical;
}

int cmd_sweep(const Common& c) {
    auto r = prepare(c, {});
    const auto& cfg = r.cfg;
    if (!cfg.sweep_omega_eg || !cfg.sweep_gamma_F) throw ConfigError("sweep: need sweep.omega_eg and sweep.gamma_F");
    FanoSweepSpec spec;
    spec.mirror = cfg.mirror;
    spec.omega_eg = cfg.sweep_omega_eg->values();
    spec.gamma_F = cfg.sweep_gamma_F->values();
    spec.trace_points = cfg.sweep_trace;
    const auto corr = correlations(r);
    const auto res = fano_sweep(spec, cfg.geometry, cfg.emitter, corr, cfg.settings, r.threads);

    {
        CsvWriter csv(r.path("sweep_map.csv"), r.hash, "omega_eg_meV,gammaF_meV,I,delta,P_emit,status");
        for (const auto& p : res.points)
            if (!p.on_trace) csv.row(p.omega_eg, p.axis2, p.result.I, p.result.delta, p.result.P_emit, p.status);
    }
    {
        CsvWriter csv(r.path("sweep_trace.csv"), r.hash,
                      "gammaF_meV,omega_peak_meV,omega_dip_meV,I,delta,P_emit,epsilon_rel,status");
        for (std::size_t k = 0; k < res.trace.size(); ++k) {
            const auto& t = res.trace[k];
            const SweepPoint* tp = nullptr;
            for (const auto& p : res.points)
                if (p.on_trace && p.axis2 == t.gamma_F) tp = &p;
            const IndistResult none{std::nan(""), std::nan(""), std::nan("")};
            const auto& v = tp ? tp->result : none;
            csv.row(t.gamma_F, t.omega_peak, t.omega_dip, v.I, v.delta, v.P_emit, t.fit.epsilon_rel,
                    tp ? tp->status : t.status);
        }
    }
    nlohmann::json j;
    int failed = 0;
    for (const auto& p : res.points) failed += !p.ok();
    j["points"] = res.points.size();
    j["failed"] = failed;
    j["trajectory"] = sanity(res);
    if (const auto* b = res.best()) {
        j["best"] = summary(b->result);
        j["best"]["omega_eg"] = b->omega_eg;
        j["best"]["gamma_F"] = b->axis2;
        j["best"]["on_trace"] = b->on_trace;
        std::cout << "min delta " << b->result.delta << " at omega_eg " << b->omega_eg << " gamma_F " << b->axis2
                  << "\n";
    }
    r.write_json("sweep_summary.json", j);
    return res.best() ? ok : numerical;
}

int cmd_fp(const Common& c) {
    auto r = prepare(c, {});
    const auto& cfg = r.cfg;
    const auto corr = correlations(r);
    if (cfg.fp_sweep_detuning || cfg.fp_sweep_r) {
        if (!cfg.fp_sweep_detuning || !cfg.fp_sweep_r) throw ConfigError("fp.sweep: need both detuning and r");
        FpSweepSpec spec{cfg.fp_sweep_detuning->values(), cfg.fp_sweep_r->values(), cfg.fp_reference};
        for (double x : spec.r)
            if (!(x > 0.0 && x < 1.0)) throw ConfigError("fp.sweep.r: values must lie in (0, 1)");
        const auto res = fp_sweep(spec, cfg.geometry, cfg.emitter, corr, cfg.settings, r.threads);
        CsvWriter csv(r.path("fp_map.csv"), r.hash, "omega_eg_meV,r,I,delta,P_emit,status");
        for (const auto& p : res.points) csv.row(p.omega_eg, p.axis2, p.result.I, p.result.delta, p.result.P_emit, p.status);
        nlohmann::json j;
        j["points"] = res.points.size();
        j["trajectory"] = sanity(res);
        if (const auto* b = res.best()) {
            j["best"] = summary(b->result);
            j["best"]["omega_eg"] = b->omega_eg;
            j["best"]["r"] = b->axis2;
            std::cout << "min delta " << b->result.delta << " at r " << b->axis2 << "\n";
        }
        r.write_json("fp_summary.json", j);
        return res.best() ? ok : numerical;
    }
    const auto mode = fp_single_mode(cfg.fp_r, cfg.geometry, cfg.emitter, cfg.fp_reference, cfg.settings.fit.poles);
    EmitterCoupling em = cfg.emitter;
    em.omega_eg = mode.omega_1 + cfg.fp_detuning;
    OneColour spec;
    const auto res = fp_baseline(cfg.fp_r, cfg.geometry, em, corr, cfg.settings, mode.omega_1, &spec);
    write_spectrum(r, "fp_spectrum.csv", spec);
    auto j = summary(res);
    j["omega_eg"] = em.omega_eg;
    j["omega_c"] = mode.omega_1;
    j["kappa"] = mode.kappa_1;
    j["g"] = mode.g;
    r.write_json("fp_summary.json", j);
    std::cout << "I " << res.I << "  delta " << res.delta << "\n";
    return std::isfinite(res.I) ? ok : numerical;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fano-cavity single-photon source simulator"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "JSON configuration")->required();
        sub->add_option("--out", common.out, "output directory");
        sub->add_option("--threads", common.threads, "worker threads");
        sub->add_option("--seed", common.seed, "optimizer seed (0: deterministic axis start)");
    };

    LdosFlags lf;
    auto* ldos = app.add_subcommand("ldos", "local density of states curve or gamma_F map");
    add_common(ldos);
    ldos->add_option("--position", lf.position, "emitter position x_tilde in [-1, 1]");
    ldos->add_option("--range", lf.range, "frequency range LO HI (meV)")->expected(2);
    ldos->add_option("--points", lf.points, "number of frequency points");
    ldos->add_option("--gammaF-range", lf.gamma_range, "gamma_F map FROM TO POINTS (meV)")->expected(3);
    ldos->add_option("--fp-r", lf.fp_r, "replace the Fano mirror by a constant reflectivity");

    auto* fitc = app.add_subcommand("fit", "two-mode mapping of the LDOS");
    add_common(fitc);

    SpectrumFlags sf;
    auto* spec = app.add_subcommand("spectrum", "emission spectrum and indistinguishability at one point");
    add_common(spec);
    spec->add_flag("--at-peak", sf.at_peak, "place the emitter on the LDOS peak");
    spec->add_flag("--at-dip", sf.at_dip, "place the emitter on the LDOS anti-resonance");
    spec->add_flag("--dump-phonons", sf.dump_phonons, "write phonon correlation tables");

    auto* sweep = app.add_subcommand("sweep", "indistinguishability map over (omega_eg, gamma_F)");
    add_common(sweep);
    auto* fp = app.add_subcommand("fp", "Fabry-Perot baseline point or (detuning, r) map");
    add_common(fp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }

    try {
        if (*ldos) return cmd_ldos(common, lf);
        if (*fitc) return cmd_fit(common);
        if (*spec) return cmd_spectrum(common, sf);
        if (*sweep) return cmd_sweep(common);
        if (*fp) return cmd_fp(common);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return usage;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return usage;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return infeasible;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return numerical;
    }
    return usage;
}
