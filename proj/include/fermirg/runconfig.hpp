#pragma once

// Run configuration: a single versioned JSON file mapping onto the
// engine parameters, with the parameter-window validation rules.

#include <string>
#include <vector>

#include "fermirg/rgflow.hpp"

namespace fermirg {

struct RunConfig {
    int schema_version = 1;
    RGConfig rg;
    double coupling = 1e-3;  // quartic interaction strength
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    static RunConfig defaults();
    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);
    std::string to_json_text() const;
};

struct ValidationLine {
    std::string check;
    std::string constraint;
    bool ok = true;
    bool fatal = true;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationLine> lines;
    bool accepted() const {
        for (const auto& l : lines)
            if (!l.ok && l.fatal) return false;
        return true;
    }
};

/// Check every parameter window; violations of the scale/norm windows
/// are fatal, the alpha window is recorded as a warning.
ValidationReport validate_config(const RunConfig& cfg);

}  // namespace fermirg
