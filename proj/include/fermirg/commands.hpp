#pragma once

// Run orchestration behind the CLI verbs: deterministic artifact
// directories with a manifest naming every emitted table.

#include <filesystem>

#include "fermirg/runconfig.hpp"

namespace fermirg {

struct CommandResult {
    int exit_code = 0;
    std::vector<std::string> emitted;  // paths relative to the out dir
    std::string summary;
};

CommandResult cmd_validate(const RunConfig& cfg, const std::string& out_dir);
CommandResult cmd_geometry(const RunConfig& cfg, const std::string& out_dir);
CommandResult cmd_ladders(const RunConfig& cfg, const std::string& out_dir);
CommandResult cmd_flow(const RunConfig& cfg, const std::string& out_dir);
CommandResult cmd_audit(const RunConfig& cfg, const std::string& out_dir);

// ---------------------------------------------------------------------------
// pieces reused by the acceptance suite

struct ScanRow {
    int j = 0;
    int ell = 0;
    std::string dispersion;
    double norm_pp = 0.0;    // |V_pp(L_ell^{pp})|_{3,Sigma_j}, constant term
    double norm_full = 0.0;  // |L_ell|_{3,Sigma_j}, constant term
};

/// Particle-particle suppression trend over scales for one dispersion.
std::vector<ScanRow> pp_suppression_scan(const std::string& dispersion,
                                         const ScaleParams& sp,
                                         const std::vector<int>& scales,
                                         int ell_max, double rung_strength);

struct LambdaSlopeRow {
    int m = 0, n = 0;
    double slope = 0.0;
    double expected = 0.0;
    std::vector<double> magnitudes;
};

/// Coupling-scaling probe on the sampled first-scale computation.
std::vector<LambdaSlopeRow> lambda_scaling_probe(const FlowContext& ctx,
                                                 const std::vector<double>& lambdas);

/// The interaction fixture used by the flow commands and the probes.
std::function<GrassmannFunction(const GeneratorLabels&)> quartic_fixture(
    double coupling);

}  // namespace fermirg
