#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace qrelax::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsage = 1,
    kConfigError = 2,
    kNotConverged = 3,
    kDataError = 4,
};

// Every key with its default value.
nlohmann::json default_config();

// Named overrides applied before the config file ("paper", "fig3a", "fig3b").
nlohmann::json preset(const std::string& name);

// QRELAX_<KEY>__<SUBKEY>=value environment overrides; keys match
// case-insensitively, values parse as JSON or else as strings.
void apply_env_overrides(nlohmann::json& config, const std::vector<std::string>& environment);

// Runs one subcommand; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace qrelax::cli
