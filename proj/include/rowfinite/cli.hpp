#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "rowfinite/harness.hpp"

namespace rowfinite::cli {

// Exit codes: 0 ok, 2 usage, 3 resource guard, 4 solver abort, 5 check failure.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitResource = 3;
constexpr int kExitSolver = 4;
constexpr int kExitCheckFailed = 5;

/// Strictly-parsed run document (unknown keys rejected, parameters validated
/// at load time).
struct RunConfig {
    std::string schema = "rowfinite-run/1";
    ExperimentPlan plan;
    ChecksSelect checks;
    bool calibrate_z = false;
    std::string out_dir = "out";
    bool write_csv = true;
    bool write_json = true;

    static RunConfig parse(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
};

/// Full command-line entry point (generate | simulate | linear-solve |
/// verify | study). Returns the process exit code.
int dispatch(int argc, const char* const* argv);

}  // namespace rowfinite::cli
