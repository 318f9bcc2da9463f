#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dockorder {

struct ProcessResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

/// Run argv[0] (searched on PATH) without a shell. `exec_failed` is set when
/// the program could not be started at all.
struct ProcessOutcome {
    ProcessResult result;
    bool exec_failed = false;
    std::string exec_error;
};

ProcessOutcome run_process(const std::vector<std::string>& argv, const std::optional<std::string>& cwd = std::nullopt);

/// Value of an environment variable, or `fallback` when unset/empty.
std::string env_or(const char* name, const std::string& fallback);

}  // namespace dockorder
