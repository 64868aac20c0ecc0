// Command line front end: validate, geometry, ladders, flow, audit.

#include <iostream>

#include "CLI11.hpp"
#include "fermirg/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"multiscale renormalization-group engine for 2d fermion gases"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    int j_max = -1;
    int ell_max = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON configuration file");
        cmd->add_option("--out", out_dir, "artifact output directory");
        cmd->add_option("--seed", seed, "override the corpus seed");
        cmd->add_option("--j-max", j_max, "override the deepest scale");
        cmd->add_option("--ell-max", ell_max, "override the ladder series cap");
    };

    CLI::App* validate = app.add_subcommand("validate", "check a configuration");
    CLI::App* geometry = app.add_subcommand("geometry", "curve and sector tables");
    CLI::App* ladders = app.add_subcommand("ladders", "ladder suites and scans");
    CLI::App* flow = app.add_subcommand("flow", "run the recursion driver");
    CLI::App* audit = app.add_subcommand("audit", "projective and scaling audits");
    for (auto* c : {validate, geometry, ladders, flow, audit}) add_common(c);

    bool print_default = false;
    validate->add_flag("--print-default", print_default,
                       "print the default configuration and exit");

    CLI11_PARSE(app, argc, argv);

    try {
        fermirg::RunConfig cfg = config_path.empty()
                                     ? fermirg::RunConfig::defaults()
                                     : fermirg::RunConfig::from_file(config_path);
        if (seed != 0) cfg.seed = seed;
        if (j_max > 0) cfg.rg.jmax = j_max;
        if (ell_max > 0) cfg.rg.ell_max = ell_max;

        if (print_default) {
            std::cout << fermirg::RunConfig::defaults().to_json_text() << "\n";
            return 0;
        }

        fermirg::CommandResult res;
        if (app.got_subcommand(validate)) {
            res = fermirg::cmd_validate(cfg, out_dir);
        } else {
            // every run starts from a validated configuration
            fermirg::ValidationReport rep = fermirg::validate_config(cfg);
            if (!rep.accepted()) {
                std::cerr << "configuration rejected:\n";
                for (const auto& l : rep.lines)
                    if (!l.ok && l.fatal)
                        std::cerr << "  " << l.check << ": " << l.constraint
                                  << (l.message.empty() ? "" : " (" + l.message + ")")
                                  << "\n";
                return 1;
            }
            if (app.got_subcommand(geometry))
                res = fermirg::cmd_geometry(cfg, out_dir);
            else if (app.got_subcommand(ladders))
                res = fermirg::cmd_ladders(cfg, out_dir);
            else if (app.got_subcommand(flow))
                res = fermirg::cmd_flow(cfg, out_dir);
            else if (app.got_subcommand(audit))
                res = fermirg::cmd_audit(cfg, out_dir);
        }
        std::cout << res.summary << "\n";
        for (const auto& f : res.emitted) std::cout << "  " << out_dir << "/" << f << "\n";
        return res.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
