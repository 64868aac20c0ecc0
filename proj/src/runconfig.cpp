#include "fermirg/runconfig.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fermirg {

RunConfig RunConfig::defaults() { return RunConfig{}; }

namespace {
void read_grid(const nlohmann::json& j, TorusGrid& g) {
    g.n0 = j.value("n0", g.n0);
    g.n1 = j.value("n1", g.n1);
    g.n2 = j.value("n2", g.n2);
    g.a0 = j.value("a0", g.a0);
    if (j.contains("dk_spatial")) {
        double dk = j.at("dk_spatial").get<double>();
        g.a1 = 2.0 * M_PI / (g.n1 * dk);
        g.a2 = 2.0 * M_PI / (g.n2 * dk);
    } else {
        g.a1 = j.value("a1", g.a1);
        g.a2 = j.value("a2", g.a2);
    }
}
}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    RunConfig cfg;
    cfg.schema_version = j.value("schema_version", 1);
    if (cfg.schema_version != 1)
        throw std::invalid_argument("config: unsupported schema version");
    cfg.rg.dispersion = j.value("dispersion", cfg.rg.dispersion);
    if (j.contains("scales")) {
        const auto& s = j.at("scales");
        cfg.rg.sp.M = s.value("M", cfg.rg.sp.M);
        cfg.rg.sp.aleph = s.value("aleph", cfg.rg.sp.aleph);
        cfg.rg.sp.j0 = s.value("j0", cfg.rg.sp.j0);
        cfg.rg.sp.jbar = s.value("jbar", cfg.rg.sp.jbar);
    }
    if (j.contains("norms")) {
        const auto& n = j.at("norms");
        cfg.rg.norms.lambda0 = n.value("lambda0", cfg.rg.norms.lambda0);
        cfg.rg.norms.upsilon = n.value("upsilon", cfg.rg.norms.upsilon);
        cfg.rg.norms.alpha = n.value("alpha", cfg.rg.norms.alpha);
        cfg.rg.norms.B_const = n.value("B", cfg.rg.norms.B_const);
    }
    cfg.rg.alpha_bar = j.value("alpha_bar", cfg.rg.alpha_bar);
    cfg.rg.n0_asym = j.value("n0_asymmetry", cfg.rg.n0_asym);
    cfg.rg.ell_max = j.value("ell_max", cfg.rg.ell_max);
    cfg.rg.jmax = j.value("jmax", cfg.rg.jmax);
    cfg.rg.sample_arc_fraction = j.value("sample_arc_fraction", cfg.rg.sample_arc_fraction);
    if (j.contains("grid")) read_grid(j.at("grid"), cfg.rg.grid);
    if (j.contains("fixpoint")) {
        cfg.rg.fix_tol = j.at("fixpoint").value("tol", cfg.rg.fix_tol);
        cfg.rg.fix_maxit =
            j.at("fixpoint").value("max_iterations", cfg.rg.fix_maxit);
    }
    if (j.contains("shape")) {
        cfg.rg.shape.r = j.at("shape").value("r", cfg.rg.shape.r);
        cfg.rg.shape.r0 = j.at("shape").value("r0", cfg.rg.shape.r0);
    }
    cfg.coupling = j.value("coupling", cfg.coupling);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out", cfg.out_dir);
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string RunConfig::to_json_text() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["dispersion"] = rg.dispersion;
    j["scales"] = {{"M", rg.sp.M},
                   {"aleph", rg.sp.aleph},
                   {"j0", rg.sp.j0},
                   {"jbar", rg.sp.jbar}};
    j["norms"] = {{"lambda0", rg.norms.lambda0},
                  {"upsilon", rg.norms.upsilon},
                  {"alpha", rg.norms.alpha},
                  {"B", rg.norms.B_const}};
    j["alpha_bar"] = rg.alpha_bar;
    j["n0_asymmetry"] = rg.n0_asym;
    j["ell_max"] = rg.ell_max;
    j["jmax"] = rg.jmax;
    j["sample_arc_fraction"] = rg.sample_arc_fraction;
    j["grid"] = {{"n0", rg.grid.n0}, {"n1", rg.grid.n1}, {"n2", rg.grid.n2},
                 {"a0", rg.grid.a0}, {"a1", rg.grid.a1}, {"a2", rg.grid.a2}};
    j["fixpoint"] = {{"tol", rg.fix_tol}, {"max_iterations", rg.fix_maxit}};
    j["shape"] = {{"r", rg.shape.r}, {"r0", rg.shape.r0}};
    j["coupling"] = coupling;
    j["seed"] = seed;
    j["out"] = out_dir;
    return j.dump(2);
}

ValidationReport validate_config(const RunConfig& cfg) {
    ValidationReport rep;
    auto add = [&](const std::string& check, const std::string& constraint,
                   bool ok, bool fatal, const std::string& msg) {
        rep.lines.push_back({check, constraint, ok, fatal, msg});
    };
    const ScaleParams& sp = cfg.rg.sp;
    const KernelNormConfig& nc = cfg.rg.norms;

    add("scale parameter", "M > 1", sp.M > 1.0, true,
        sp.M > 1.0 ? "" : "scale parameter must exceed 1");
    add("sector exponent", "1/2 < aleph < 2/3",
        sp.aleph > 0.5 && sp.aleph < 2.0 / 3.0, true,
        "fix a constant 1/2 < aleph < 2/3");
    add("coupling window", "0 < lambda0 < 1",
        nc.lambda0 > 0.0 && nc.lambda0 < 1.0, true, "");
    add("power-counting exponent", "0 < upsilon < 1/4",
        nc.upsilon > 0.0 && nc.upsilon < 0.25, true,
        "fix 0 < upsilon < 1/4");
    add("first scale", "j0 >= 2", sp.j0 >= 2, true, "");
    add("infrared cutoff", "jbar >= j0 + 2", sp.jbar >= sp.j0 + 2, true,
        "the infrared cutoff must sit at least two scales below j0");
    double alpha_hi = std::pow(nc.lambda0, -nc.upsilon / 10.0);
    bool window = cfg.rg.alpha_bar < nc.alpha && nc.alpha < alpha_hi;
    add("alpha window", "alpha_bar < alpha < lambda0^{-upsilon/10}", window,
        false,
        window ? ""
               : "recorded: alpha = " + std::to_string(nc.alpha) +
                     " lies outside (" + std::to_string(cfg.rg.alpha_bar) + ", " +
                     std::to_string(alpha_hi) + ")");
    add("ladder series cap", "ell_max >= 1", cfg.rg.ell_max >= 1, true, "");
    add("grid", "positive extents",
        cfg.rg.grid.n0 > 1 && cfg.rg.grid.n1 > 1 && cfg.rg.grid.n2 > 1 &&
            cfg.rg.grid.a0 > 0 && cfg.rg.grid.a1 > 0 && cfg.rg.grid.a2 > 0,
        true, "");
    return rep;
}

}  // namespace fermirg
