#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fermirg/commands.hpp"

using namespace fermirg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("fermirg_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("configuration validation windows") {
    RunConfig cfg = RunConfig::defaults();
    CHECK(validate_config(cfg).accepted());

    // parameter-window rejections
    RunConfig bad_aleph = cfg;
    bad_aleph.rg.sp.aleph = 0.7;
    CHECK(!validate_config(bad_aleph).accepted());

    RunConfig bad_upsilon = cfg;
    bad_upsilon.rg.norms.upsilon = 0.3;
    CHECK(!validate_config(bad_upsilon).accepted());

    RunConfig bad_jbar = cfg;
    bad_jbar.rg.sp.jbar = bad_jbar.rg.sp.j0 + 1;
    CHECK(!validate_config(bad_jbar).accepted());

    // the alpha window is recorded but not fatal (the toy parameters sit
    // outside it by design)
    ValidationReport rep = validate_config(cfg);
    bool alpha_line_found = false;
    for (const auto& l : rep.lines)
        if (l.check == "alpha window") {
            alpha_line_found = true;
            CHECK(!l.fatal);
            CHECK(!l.ok);  // alpha = 10 > lambda0^{-upsilon/10}
        }
    CHECK(alpha_line_found);
}

TEST_CASE("config json round trip") {
    RunConfig cfg = RunConfig::defaults();
    cfg.rg.sp.M = 1.75;
    cfg.coupling = 5e-4;
    cfg.rg.jmax = 4;
    RunConfig back = RunConfig::from_json_text(cfg.to_json_text());
    CHECK(back.rg.sp.M == cfg.rg.sp.M);
    CHECK(back.coupling == cfg.coupling);
    CHECK(back.rg.jmax == cfg.rg.jmax);
    CHECK(back.rg.grid.n0 == cfg.rg.grid.n0);
}

TEST_CASE("geometry command is deterministic and writes a manifest") {
    RunConfig cfg = RunConfig::defaults();
    fs::path a = fresh_dir("geo_a"), b = fresh_dir("geo_b");
    cmd_geometry(cfg, a.string());
    cmd_geometry(cfg, b.string());
    for (const char* f : {"curve.csv", "sectors.csv", "partition.csv",
                          "manifest.json"}) {
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    std::string manifest = slurp(a / "manifest.json");
    CHECK(manifest.find("quantity") != std::string::npos);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("flow command is deterministic over the toy run") {
    RunConfig cfg = RunConfig::defaults();
    cfg.rg.jmax = 3;  // short run keeps the suite fast
    fs::path a = fresh_dir("flow_a"), b = fresh_dir("flow_b");
    cmd_flow(cfg, a.string());
    cmd_flow(cfg, b.string());
    for (const char* f : {"flow/delta-e.csv", "flow/ren-chain.json",
                          "manifest.json"}) {
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    // zero coupling flow produces an all-zero counterterm table
    RunConfig zero = cfg;
    zero.coupling = 0.0;
    fs::path c = fresh_dir("flow_zero");
    cmd_flow(zero, c.string());
    std::string csv = slurp(c / "flow" / "delta-e.csv");
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
        auto last = line.rfind(',');
        CHECK(line.substr(last + 1) == "0");
    }
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(c);
}

TEST_CASE("validate command reports and exits nonzero on rejection") {
    RunConfig bad = RunConfig::defaults();
    bad.rg.sp.aleph = 0.7;
    fs::path dir = fresh_dir("validate");
    CommandResult res = cmd_validate(bad, dir.string());
    CHECK(res.exit_code == 1);
    CHECK(slurp(dir / "validate.json").find("\"accepted\": false") !=
          std::string::npos);
    fs::remove_all(dir);
}
