#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pipeline.hpp"

namespace fanoqed {

inline constexpr const char* config_schema = "fanoqed.config/1";

struct ConfigError : Error {
    using Error::Error;
};

struct Range {
    double from = 0.0, to = 0.0;
    int points = 0;
    std::vector<double> values() const { return linspace(from, to, points); }
};

struct SimConfig {
    CavityGeometry geometry;
    FanoMirror mirror;
    EmitterCoupling emitter;
    PhononEnv phonons;
    PipelineSettings settings;
    std::string placement; // "", "ldos_peak" or "ldos_dip": emitter put on an LDOS feature

    // ldos command
    double ldos_lo = 0.0, ldos_hi = 0.0;
    int ldos_points = 2001;
    std::optional<double> ldos_fp_r; // constant right mirror instead of the Fano mirror
    std::optional<Range> ldos_gamma_F;

    // sweep command
    std::optional<Range> sweep_omega_eg, sweep_gamma_F;
    bool sweep_trace = true;

    // fp command
    double fp_r = 0.99;
    double fp_detuning = 0.0;   // emitter relative to the FP resonance next to fp_reference
    double fp_reference = 0.0;
    std::optional<Range> fp_sweep_detuning, fp_sweep_r;

    nlohmann::json source; // effective configuration, used for the hash
};

// 64-bit FNV-1a of the canonical (key-sorted, compact) JSON text
inline std::string config_hash(const nlohmann::json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline void allow_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double number(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}

// a frequency is either meV or {"pi_fsr": x, "plus": y} meaning x*pi*Delta + y
inline double frequency(const nlohmann::json& j, const std::string& where, double fsr) {
    if (j.is_number()) return j.get<double>();
    allow_keys(j, where, {"pi_fsr", "plus"});
    if (!j.contains("pi_fsr")) throw ConfigError(where + ": missing 'pi_fsr'");
    double v = number(j["pi_fsr"], where + ".pi_fsr") * pi * fsr;
    if (j.contains("plus")) v += number(j["plus"], where + ".plus");
    return v;
}

inline Range range(const nlohmann::json& j, const std::string& where, double fsr, bool freq) {
    allow_keys(j, where, {"from", "to", "points"});
    for (const char* k : {"from", "to", "points"})
        if (!j.contains(k)) throw ConfigError(where + ": missing '" + k + "'");
    Range r;
    r.from = freq ? frequency(j["from"], where + ".from", fsr) : number(j["from"], where + ".from");
    r.to = freq ? frequency(j["to"], where + ".to", fsr) : number(j["to"], where + ".to");
    if (!j["points"].is_number_integer()) throw ConfigError(where + ".points: expected an integer");
    r.points = j["points"].get<int>();
    if (r.points < 1) throw ConfigError(where + ".points: empty range");
    if (r.points > 1 && !(r.to > r.from)) throw ConfigError(where + ": need to > from");
    return r;
}

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    const auto& v = j[key];
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    } else {
        if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    }
    out = v.get<T>();
}

} // namespace detail

inline SimConfig parse_config(const nlohmann::json& j) {
    using namespace detail;
    SimConfig c;
    c.source = j;
    allow_keys(j, "config", {"schema", "geometry", "mirror", "emitter", "phonons", "fit", "spectrum", "ldos",
                             "sweep", "fp"});
    if (!j.contains("schema") || j["schema"] != config_schema)
        throw ConfigError(std::string("config.schema: expected \"") + config_schema + "\"");

    if (j.contains("geometry")) {
        const auto& g = j["geometry"];
        allow_keys(g, "geometry", {"fsr", "r0", "x_tilde"});
        get_if(g, "fsr", c.geometry.fsr, "geometry");
        get_if(g, "x_tilde", c.geometry.x_tilde, "geometry");
        if (g.contains("r0")) {
            const auto& r = g["r0"];
            if (r.is_number()) c.geometry.r_0 = r.get<double>();
            else if (r.is_array() && r.size() == 2 && r[0].is_number() && r[1].is_number())
                c.geometry.r_0 = cplx(r[0].get<double>(), r[1].get<double>());
            else throw ConfigError("geometry.r0: expected a number or [re, im]");
        }
    }
    const double fsr = c.geometry.fsr;

    if (j.contains("mirror")) {
        const auto& m = j["mirror"];
        allow_keys(m, "mirror", {"r_B", "parity", "gamma_F", "gamma_1", "gamma_2", "gamma_0", "omega_F"});
        get_if(m, "r_B", c.mirror.r_B, "mirror");
        get_if(m, "parity", c.mirror.parity, "mirror");
        if (m.contains("gamma_F")) {
            if (m.contains("gamma_1") || m.contains("gamma_2"))
                throw ConfigError("mirror: give either gamma_F or gamma_1/gamma_2");
            c.mirror.gamma_1 = c.mirror.gamma_2 = number(m["gamma_F"], "mirror.gamma_F");
        }
        get_if(m, "gamma_1", c.mirror.gamma_1, "mirror");
        get_if(m, "gamma_2", c.mirror.gamma_2, "mirror");
        get_if(m, "gamma_0", c.mirror.gamma_0, "mirror");
        if (m.contains("omega_F")) c.mirror.omega_F = frequency(m["omega_F"], "mirror.omega_F", fsr);
    }
    if (j.contains("emitter")) {
        const auto& e = j["emitter"];
        allow_keys(e, "emitter", {"Gamma_0", "Gamma_R", "omega_eg"});
        get_if(e, "Gamma_0", c.emitter.Gamma_0, "emitter");
        get_if(e, "Gamma_R", c.emitter.Gamma_R, "emitter");
        if (e.contains("omega_eg")) {
            const auto& w = e["omega_eg"];
            if (w.is_string()) {
                c.placement = w.get<std::string>();
                if (c.placement != "ldos_peak" && c.placement != "ldos_dip")
                    throw ConfigError("emitter.omega_eg: expected a frequency, \"ldos_peak\" or \"ldos_dip\"");
            } else {
                c.emitter.omega_eg = frequency(w, "emitter.omega_eg", fsr);
            }
        }
    }
    if (j.contains("phonons")) {
        const auto& p = j["phonons"];
        allow_keys(p, "phonons", {"alpha", "nu_c", "T"});
        get_if(p, "alpha", c.phonons.alpha, "phonons");
        get_if(p, "nu_c", c.phonons.nu_c, "phonons");
        get_if(p, "T", c.phonons.T, "phonons");
    }
    auto& fs = c.settings.fit;
    if (j.contains("fit")) {
        const auto& f = j["fit"];
        allow_keys(f, "fit", {"window", "min_points", "points_per_width", "max_points", "grid_kappa", "grid_delta",
                              "contour_nodes", "max_evals", "x_tol"});
        if (f.contains("window")) {
            const auto& w = f["window"];
            if (!w.is_array() || w.size() != 2) throw ConfigError("fit.window: expected [lo, hi]");
            fs.window_lo = frequency(w[0], "fit.window[0]", fsr);
            fs.window_hi = frequency(w[1], "fit.window[1]", fsr);
            if (!(fs.window_hi > fs.window_lo)) throw ConfigError("fit.window: need hi > lo");
        }
        get_if(f, "min_points", fs.min_points, "fit");
        get_if(f, "points_per_width", fs.points_per_width, "fit");
        get_if(f, "max_points", fs.max_points, "fit");
        get_if(f, "grid_kappa", fs.grid_kappa, "fit");
        get_if(f, "grid_delta", fs.grid_delta, "fit");
        get_if(f, "contour_nodes", fs.contour_nodes, "fit");
        get_if(f, "max_evals", fs.simplex.max_evals, "fit");
        get_if(f, "x_tol", fs.simplex.x_tol, "fit");
        if (fs.grid_kappa < 1 || fs.grid_delta < 1 || fs.min_points < 3 || fs.contour_nodes < 64)
            throw ConfigError("fit: grid sizes too small");
    }
    if (j.contains("spectrum")) {
        const auto& s = j["spectrum"];
        auto& ss = c.settings.spectrum;
        allow_keys(s, "spectrum", {"span", "h_base", "per_feature", "narrow_factor", "max_points"});
        get_if(s, "span", ss.span, "spectrum");
        get_if(s, "h_base", ss.h_base, "spectrum");
        get_if(s, "per_feature", ss.per_feature, "spectrum");
        get_if(s, "narrow_factor", ss.narrow_factor, "spectrum");
        get_if(s, "max_points", ss.max_points, "spectrum");
        if (!(ss.span > 0.0) || !(ss.h_base > 0.0) || ss.per_feature < 0 || ss.max_points < 16)
            throw ConfigError("spectrum: invalid grid settings");
    }
    if (j.contains("ldos")) {
        const auto& l = j["ldos"];
        allow_keys(l, "ldos", {"range", "points", "fp_r", "gamma_F"});
        if (l.contains("range")) {
            const auto& r = l["range"];
            if (!r.is_array() || r.size() != 2) throw ConfigError("ldos.range: expected [lo, hi]");
            c.ldos_lo = frequency(r[0], "ldos.range[0]", fsr);
            c.ldos_hi = frequency(r[1], "ldos.range[1]", fsr);
        }
        get_if(l, "points", c.ldos_points, "ldos");
        if (l.contains("fp_r")) c.ldos_fp_r = number(l["fp_r"], "ldos.fp_r");
        if (l.contains("gamma_F")) c.ldos_gamma_F = range(l["gamma_F"], "ldos.gamma_F", fsr, false);
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        allow_keys(s, "sweep", {"omega_eg", "gamma_F", "trace"});
        if (s.contains("omega_eg")) c.sweep_omega_eg = range(s["omega_eg"], "sweep.omega_eg", fsr, true);
        if (s.contains("gamma_F")) c.sweep_gamma_F = range(s["gamma_F"], "sweep.gamma_F", fsr, false);
        get_if(s, "trace", c.sweep_trace, "sweep");
    }
    c.fp_reference = c.emitter.omega_eg;
    if (j.contains("fp")) {
        const auto& f = j["fp"];
        allow_keys(f, "fp", {"r", "detuning", "reference", "sweep"});
        get_if(f, "r", c.fp_r, "fp");
        get_if(f, "detuning", c.fp_detuning, "fp");
        if (f.contains("reference")) c.fp_reference = frequency(f["reference"], "fp.reference", fsr);
        if (f.contains("sweep")) {
            const auto& s = f["sweep"];
            allow_keys(s, "fp.sweep", {"detuning", "r"});
            if (s.contains("detuning")) c.fp_sweep_detuning = range(s["detuning"], "fp.sweep.detuning", fsr, false);
            if (s.contains("r")) c.fp_sweep_r = range(s["r"], "fp.sweep.r", fsr, false);
        }
    }

    // module invariants, reported as configuration errors
    try {
        c.geometry.validate();
        c.mirror.validate();
        c.mirror.phases();
        c.phonons.validate();
        if (!(c.emitter.Gamma_0 > 0.0) || !(c.emitter.Gamma_R >= 0.0))
            throw DomainError("emitter: Gamma_0 must be positive and Gamma_R nonnegative");
        if (!(c.fp_r > 0.0 && c.fp_r < 1.0)) throw DomainError("fp.r must lie in (0, 1)");
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

inline SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

// ---- serialisation -------------------------------------------------------------------

inline nlohmann::json to_json(const MappedPair& p) {
    return {{"g", p.g},           {"omega1", p.omega_1}, {"omega2", p.omega_2}, {"V0", p.V_0},
            {"varphi", p.varphi}, {"kappa1", p.kappa_1}, {"kappa2", p.kappa_2}};
}

inline nlohmann::json to_json(const FitReport& f) {
    nlohmann::json j = to_json(f.pair);
    j["epsilon"] = f.epsilon;
    j["epsilon_rel"] = f.epsilon_rel;
    j["window"] = {f.window_lo, f.window_hi};
    j["poles"] = nlohmann::json::array();
    for (int k = 0; k < 2; ++k)
        j["poles"].push_back({{"re", f.targets[k].z.real()},
                              {"im", f.targets[k].z.imag()},
                              {"res_re", f.targets[k].R.real()},
                              {"res_im", f.targets[k].R.imag()},
                              {"achieved_re", f.achieved[k].real()},
                              {"achieved_im", f.achieved[k].imag()}});
    return j;
}

inline nlohmann::json to_json(const IndistResult& r) {
    return {{"I", r.I},
            {"delta", r.delta},
            {"P_emit", r.P_emit},
            {"grid_points", r.grid_points},
            {"grid_spacing", r.grid_spacing},
            {"tau_max", r.tau_max},
            {"tau_truncated", r.tau_truncated},
            {"trace_dev", r.trajectory.max_trace_dev},
            {"herm_dev", r.trajectory.max_herm_dev},
            {"min_eig", r.trajectory.min_eig}};
}

// CSV writer: config-hash comment line, header, then rows in scientific notation
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& hash, const std::string& header) : out_(path) {
        if (!out_) throw Error("cannot write '" + path + "'");
        out_ << "# fanoqed config_hash=" << hash << "\n" << header << "\n";
    }
    template <class... T>
    void row(const T&... v) {
        bool first = true;
        ((out_ << (first ? "" : ",") << fmt(v), first = false), ...);
        out_ << "\n";
    }

private:
    static std::string fmt(double v) {
        if (!std::isfinite(v)) return "nan";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.10e", v);
        return buf;
    }
    static std::string fmt(const std::string& s) { return s; }
    static std::string fmt(const char* s) { return s; }
    std::ofstream out_;
};

} // namespace fanoqed
