#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "app_config.hpp"

namespace qagent::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitMissingResource = 2,
    kExitUsage = 64,
};

/// Entry point behind the qagent binary. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env);

}  // namespace qagent::cli
