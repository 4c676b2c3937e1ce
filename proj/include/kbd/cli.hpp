#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kbd {

struct CliInvocation {
    std::string command;  // explore, simulate, evaluate, export, baseline
    std::string config_path;
    std::vector<std::string> overrides;  // raw key=value specs from --set
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::string baseline_kind;  // baseline only: random | scripted-expert
};

// Executes one resolved invocation; throws the library's named errors.
// Returns 0 on success, 2 when a run aborted after writing partial outputs.
int run_invocation(const CliInvocation& invocation);

// Parses argv and dispatches. Exit statuses: 0 success, 1 validation error,
// 2 runtime/environment failure.
int run_cli(int argc, const char* const* argv);

}  // namespace kbd
