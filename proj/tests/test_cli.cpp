#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include <fanoqed/core.hpp>

namespace fs = std::filesystem;
using Catch::Matchers::WithinAbs;
using nlohmann::json;

namespace {
const fs::path work = FANOQED_WORK;
const fs::path configs = fs::path(FANOQED_SOURCE_DIR) / "examples" / "configs";

int run(const std::string& args) {
    const std::string cmd = std::string("\"") + FANOQED_CLI + "\" " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path fresh(const std::string& name) {
    const fs::path d = work / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path write_config(const fs::path& dir, const json& j) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

json fig2a() { return read_json(configs / "fig2a_fit.json"); }

std::string args(const fs::path& cfg, const fs::path& out) {
    return "--config \"" + cfg.string() + "\" --out \"" + out.string() + "\"";
}
} // namespace

TEST_CASE("usage errors exit with 2", "[cli]") {
    const auto d = fresh("usage");
    CHECK(run("") == 2);
    CHECK(run("ldos") == 2);
    CHECK(run("frobnicate --config x.json") == 2);
    CHECK(run("ldos --config /nonexistent/config.json") == 2);
    CHECK(run("ldos " + args(configs / "fig2a_fit.json", d) + " --points 0") == 2);
    CHECK(run("ldos " + args(configs / "fig2a_fit.json", d) + " --threads 0") == 2);
    CHECK(run("ldos " + args(configs / "fig2a_fit.json", d) + " --position 3") == 2);
    CHECK(run("spectrum " + args(configs / "fig3_optimum.json", d) + " --at-peak --at-dip") == 2);

    auto j = fig2a();
    j["mirror"]["width"] = 1.0;
    CHECK(run("ldos " + args(write_config(d, j), d)) == 2);
    j = fig2a();
    j["sweep"] = {{"omega_eg", {{"from", 3170.0}, {"to", 3175.0}, {"points", 0}}},
                  {"gamma_F", {{"from", 0.5}, {"to", 1.0}, {"points", 2}}}};
    CHECK(run("sweep " + args(write_config(d, j), d)) == 2);
    std::ofstream(d / "broken.json") << "{\"schema\": ";
    CHECK(run("fit " + args(d / "broken.json", d)) == 2);
}

TEST_CASE("a fit window without the poles is infeasible", "[cli]") {
    const auto d = fresh("infeasible");
    auto j = fig2a();
    j["fit"] = {{"window", {{{"pi_fsr", 101.3}}, {{"pi_fsr", 101.5}}}}};
    CHECK(run("fit " + args(write_config(d, j), d)) == 3);
}

TEST_CASE("bare half cavity LDOS through the command line", "[cli]") {
    const auto d = fresh("ldos_fp0");
    REQUIRE(run("ldos " + args(configs / "fig2a_fit.json", d) + " --fp-r 0 --range 100 140 --points 41") == 0);
    const auto l = lines(d / "ldos.csv");
    REQUIRE(l.size() == 43);
    CHECK(l[0].rfind("# fanoqed config_hash=", 0) == 0);
    CHECK(l[0].size() == std::string("# fanoqed config_hash=").size() + 16);
    CHECK(l[1] == "omega_meV,J_over_Gamma0");
    for (std::size_t i = 2; i < l.size(); ++i) {
        double w = 0.0, J = 0.0;
        REQUIRE(std::sscanf(l[i].c_str(), "%lf,%lf", &w, &J) == 2);
        CHECK_THAT(J, WithinAbs(1.0 - std::cos(w / 10.0), 1e-9));
    }
}

TEST_CASE("LDOS map over gamma_F", "[cli]") {
    const auto d = fresh("ldos_map");
    REQUIRE(run("ldos " + args(configs / "fig2a_fit.json", d) + " --gammaF-range 0.5 2.0 4 --points 101") == 0);
    const auto l = lines(d / "ldos_map.csv");
    CHECK(l[1] == "gammaF_meV,omega_meV,J_over_Gamma0");
    CHECK(l.size() == 2 + 4 * 101);
}

TEST_CASE("fit report", "[cli]") {
    const auto d = fresh("fit");
    REQUIRE(run("fit " + args(configs / "fig2a_fit.json", d)) == 0);
    const auto j = read_json(d / "fit.json");
    for (const char* k : {"g", "omega1", "omega2", "V0", "varphi", "kappa1", "kappa2", "epsilon", "window", "poles",
                          "config_hash"})
        CHECK(j.contains(k));
    CHECK(j["poles"].size() == 2);
    CHECK(j["relative_l2"].get<double>() < 0.05);
    const auto l = lines(d / "fit_overlay.csv");
    CHECK(l[0] == "# fanoqed config_hash=" + j["config_hash"].get<std::string>());
    CHECK(l[1] == "omega_meV,J_over_Gamma0,Jmapped_over_Gamma0");
}

TEST_CASE("outputs are deterministic and the seed is part of the hash", "[cli]") {
    const auto a = fresh("det_a"), b = fresh("det_b"), c = fresh("det_c");
    REQUIRE(run("fit " + args(configs / "fig2a_fit.json", a)) == 0);
    REQUIRE(run("fit " + args(configs / "fig2a_fit.json", b) + " --threads 2") == 0);
    REQUIRE(run("fit " + args(configs / "fig2a_fit.json", c) + " --seed 7") == 0);
    CHECK(slurp(a / "fit.json") == slurp(b / "fit.json"));
    CHECK(slurp(a / "fit_overlay.csv") == slurp(b / "fit_overlay.csv"));
    CHECK(read_json(a / "fit.json")["config_hash"] != read_json(c / "fit.json")["config_hash"]);
}

TEST_CASE("spectrum with phonon tables", "[cli]") {
    const auto d = fresh("spectrum");
    REQUIRE(run("spectrum " + args(configs / "fig3_optimum.json", d) + " --dump-phonons") == 0);
    CHECK(lines(d / "spectrum.csv")[1] == "omega_meV,Sbar_norm");
    for (const char* f : {"phonon_phi.csv", "phonon_lambda_x.csv", "phonon_lambda_y.csv"})
        CHECK(lines(d / f)[1] == "tau_ps,re,im");
    const auto j = read_json(d / "spectrum_summary.json");
    const double I = j["I"];
    CHECK(I > 0.9);
    CHECK(I < 1.0);
}

TEST_CASE("small Fano and FP sweeps", "[cli]") {
    const auto d = fresh("sweeps");
    auto j = read_json(configs / "fig3_optimum.json");
    j["emitter"]["omega_eg"] = {{"pi_fsr", 101}};
    j["sweep"] = {{"omega_eg", {{"from", {{"pi_fsr", 101}, {"plus", -2.0}}}, {"to", {{"pi_fsr", 101}, {"plus", 2.0}}}, {"points", 2}}},
                  {"gamma_F", {{"from", 0.8}, {"to", 1.2}, {"points", 2}}},
                  {"trace", true}};
    j["fp"] = {{"reference", {{"pi_fsr", 100.5}}},
               {"sweep", {{"detuning", {{"from", -0.5}, {"to", 0.5}, {"points", 2}}},
                          {"r", {{"from", 0.97}, {"to", 0.99}, {"points", 2}}}}}};
    const auto cfg = write_config(d, j);
    REQUIRE(run("sweep " + args(cfg, d)) == 0);
    auto l = lines(d / "sweep_map.csv");
    CHECK(l[1] == "omega_eg_meV,gammaF_meV,I,delta,P_emit,status");
    CHECK(l.size() == 2 + 4);
    CHECK(lines(d / "sweep_trace.csv").size() == 2 + 2);
    CHECK(read_json(d / "sweep_summary.json")["failed"] == 0);
    REQUIRE(run("fp " + args(cfg, d)) == 0);
    l = lines(d / "fp_map.csv");
    CHECK(l[1] == "omega_eg_meV,r,I,delta,P_emit,status");
    CHECK(l.size() == 2 + 4);
}

TEST_CASE("FP single point", "[cli]") {
    const auto d = fresh("fp_point");
    REQUIRE(run("fp " + args(configs / "fp_point.json", d)) == 0);
    const auto j = read_json(d / "fp_summary.json");
    CHECK_THAT(j["omega_c"].get<double>(), WithinAbs(100.5 * fanoqed::pi * 10.0, 1e-6));
    CHECK(j["I"].get<double>() < 1.0);
    CHECK(lines(d / "fp_spectrum.csv")[1] == "omega_meV,Sbar_norm");
}
