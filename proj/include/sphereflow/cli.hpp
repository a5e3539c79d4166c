#pragma once

/// @file cli.hpp
/// @brief Argument parsing, CSV output and subcommand dispatch.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sphereflow/flow.hpp"
#include "sphereflow/verify.hpp"

namespace sphereflow {

enum class Subcommand { run, converge, defect, check };

struct CliConfig {
    Subcommand subcommand = Subcommand::run;
    /// d, n_mesh, m, tau, T, solution, solver tolerance, quadrature order,
    /// output path and seed.
    FlowConfig flow;
    TauRule tau_rule = TauRule::quarter_h;
    std::size_t levels = 3;
    bool all_steps = false;
    bool no_timing = false;
    std::string config_file;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown for --help; carries the formatted help text.
class HelpRequested : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// argv without the program name. Precedence: flags, then the key=value file
/// named by --config, then defaults. Throws UsageError naming the offending token.
CliConfig parse_args(const std::vector<std::string>& argv);

/// %.17g for reals, "nan" for undefined values.
std::string format_real(double value);

inline constexpr const char* run_csv_header =
    "n,t,energy,dissipation,max_violation,l1_violation,cg_iterations";
inline constexpr const char* eoc_csv_header =
    "n_mesh,h,tau,l2_error,h1_error,h1_error_normalized,eoc_l2,eoc_h1,runtime_seconds";

void write_csv(std::ostream& out, std::span<const StepRecord> records);
/// With table.all_steps the h1 columns report the running maximum over all steps.
void write_csv(std::ostream& out, const EocTable& table);

/// Writes to `path` through a temporary file and a rename; nothing is left at
/// `path` when writing fails.
void emit_csv(std::span<const StepRecord> records, const std::string& path);
void emit_csv(const EocTable& table, const std::string& path);

/// Entry point behind the executable. Returns the process exit code.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace sphereflow
