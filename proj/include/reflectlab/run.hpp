#pragma once

#include "reflectlab/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>

namespace reflectlab {

enum ExitCode : int { exit_ok = 0, exit_verification_failure = 1, exit_input_error = 2 };

/// Command-line overrides of the [run] section, plus the artifact directory.
struct RunOptions {
    std::optional<RunMode> mode;
    std::optional<bool> exact;
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> budget;
    std::filesystem::path out_dir = ".";
};

/// Runs one mode, writing CSV and text artifacts into `out_dir` and a
/// `key: value` summary to `summary`. Input problems (malformed model,
/// barrier preconditions, refused enumerations) go to `errors` with exit code
/// 2; failed verifications give exit code 1.
///
///   solve       two-barrier (or one-barrier) solve + verify
///   penalize    one- and two-sided penalization sweeps + diagonal convergence
///   separation  separation class, midpoint construction, pathology bounds
///   game        brute-force game values + saddle certificates
///   batch       randomized property suites over generated scenarios
int run_scenario(const Scenario& scenario, const RunOptions& options, std::ostream& summary, std::ostream& errors);

/// Parses first; parse errors are reported with line and column (exit 2).
int run_scenario_text(std::string_view text, const RunOptions& options, std::ostream& summary, std::ostream& errors);

int run_scenario_file(const std::filesystem::path& path, const RunOptions& options, std::ostream& summary,
                      std::ostream& errors);

}  // namespace reflectlab
