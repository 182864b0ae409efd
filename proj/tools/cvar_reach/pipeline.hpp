#pragma once

#include "config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>

namespace cvar_reach::app {

enum ExitCode : int {
    exit_ok = 0,
    exit_check_failed = 1,
    exit_config = 2,
    exit_numeric = 3,
    exit_missing_inputs = 4,
    exit_stale_inputs = 5,
};

struct CommonOptions {
    std::filesystem::path out = "cvar_reach_out";
    unsigned threads = 0;
    bool quick = false;
    bool record_timings = false;
    std::optional<std::uint64_t> seed;
};

/// Applies --seed and --quick. Quick mode caps M at 10000 and the bootstrap at
/// 50 resamples; the grid is left alone because value iteration is cheap.
RunConfig resolve(RunConfig cfg, const CommonOptions& opt);

// Each stage writes into <out>/<stage>/ together with a manifest.json that
// lists every file with its SHA-256. Messages go to `log`.
int cmd_solve(const RunConfig& cfg, const CommonOptions& opt, std::ostream& log);
int cmd_mc(const RunConfig& cfg, const CommonOptions& opt, std::ostream& log);
int cmd_sets(const RunConfig& cfg, const CommonOptions& opt, std::ostream& log);
/// Property suites. Quick mode runs the pond suites with M = 1000.
int cmd_validate(const RunConfig& cfg, const CommonOptions& opt, std::ostream& log);

} // namespace cvar_reach::app
