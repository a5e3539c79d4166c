#include "sphereflow/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace sphereflow {

namespace {

// Keys accepted both as --flags and in config files.
const std::vector<std::string> value_keys{"d",     "n",          "m",      "tau",  "T",    "solution",
                                          "tau-rule", "levels", "quad", "solver-tol", "output", "seed"};
const std::vector<std::string> switch_keys{"all-steps", "no-timing"};

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_real(const std::string& key, const std::string& token) {
    auto parse_plain = [&](const std::string& text) -> std::optional<double> {
        if (text.empty()) return std::nullopt;
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (end != text.c_str() + text.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    };
    std::optional<double> value;
    if (const auto slash = token.find('/'); slash != std::string::npos) {
        const auto num = parse_plain(token.substr(0, slash));
        const auto den = parse_plain(token.substr(slash + 1));
        if (num && den && *den != 0.0) value = *num / *den;
    } else {
        value = parse_plain(token);
    }
    if (!value) throw UsageError("malformed number for " + key + ": '" + token + "'");
    return *value;
}

long long parse_integer(const std::string& key, const std::string& token) {
    long long v = 0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (token.empty() || ec != std::errc() || ptr != last) {
        throw UsageError("malformed integer for " + key + ": '" + token + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& token) {
    if (token == "1" || token == "true" || token == "yes" || token == "on") return true;
    if (token == "0" || token == "false" || token == "no" || token == "off") return false;
    throw UsageError("malformed boolean for " + key + ": '" + token + "'");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    std::map<std::string, std::string> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const bool known = std::find(value_keys.begin(), value_keys.end(), key) != value_keys.end() ||
                           std::find(switch_keys.begin(), switch_keys.end(), key) != switch_keys.end();
        if (!known) throw UsageError("unknown key '" + key + "' in config file " + path);
        values[key] = trim(line.substr(eq + 1));
    }
    return values;
}

void apply_value(CliConfig& cfg, const std::string& key, const std::string& token) {
    FlowConfig& f = cfg.flow;
    if (key == "d") {
        f.dim = static_cast<int>(parse_integer(key, token));
    } else if (key == "n") {
        f.n_mesh = static_cast<int>(parse_integer(key, token));
    } else if (key == "m") {
        const long long m = parse_integer(key, token);
        if (m < 2) throw UsageError("m must be at least 2");
        f.m = static_cast<std::size_t>(m);
    } else if (key == "tau") {
        f.tau = parse_real(key, token);
    } else if (key == "T") {
        f.final_time = parse_real(key, token);
    } else if (key == "solution") {
        f.initial_data = token;
    } else if (key == "tau-rule") {
        try {
            cfg.tau_rule = parse_tau_rule(token);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    } else if (key == "levels") {
        const long long levels = parse_integer(key, token);
        if (levels < 2) throw UsageError("levels must be at least 2");
        cfg.levels = static_cast<std::size_t>(levels);
    } else if (key == "quad") {
        f.quadrature_order = static_cast<int>(parse_integer(key, token));
    } else if (key == "solver-tol") {
        f.solver_tol = parse_real(key, token);
    } else if (key == "output") {
        f.output_path = token;
    } else if (key == "seed") {
        const long long seed = parse_integer(key, token);
        if (seed < 0) throw UsageError("seed must be nonnegative");
        f.seed = static_cast<std::uint64_t>(seed);
    } else if (key == "all-steps") {
        cfg.all_steps = parse_bool(key, token);
    } else if (key == "no-timing") {
        cfg.no_timing = parse_bool(key, token);
    }
}

}  // namespace

CliConfig parse_args(const std::vector<std::string>& argv) {
    CLI::App app{"Sphere-valued harmonic map heat flow with nodal tangent constraints", "sphereflow"};
    app.require_subcommand(1);
    std::map<std::string, std::string> flag_values;
    bool all_steps = false;
    bool no_timing = false;
    std::string config_file;

    app.add_option("--config", config_file, "key=value file; flags override its entries");
    app.add_option("--d", flag_values["d"], "spatial dimension 1, 2 or 3 (default 1)");
    app.add_option("--n", flag_values["n"], "subdivisions per axis (default 16)");
    app.add_option("--m", flag_values["m"], "target dimension, at least 2 (default 2)");
    app.add_option("--tau", flag_values["tau"], "step size, decimal or p/q (default 1/64)");
    app.add_option("--T", flag_values["T"], "final time (default 0.25)");
    app.add_option("--solution", flag_values["solution"], "phase, constant or random (default phase)");
    app.add_option("--tau-rule", flag_values["tau-rule"], "tau=h/4, tau=sqrt_h/8 or fixed (default tau=h/4)");
    app.add_option("--levels", flag_values["levels"], "refinement levels (default 3)");
    app.add_option("--quad", flag_values["quad"], "quadrature exactness degree (default 2)");
    app.add_option("--solver-tol", flag_values["solver-tol"], "relative CG tolerance (default 1e-12)");
    app.add_option("--output", flag_values["output"], "CSV path; stdout when omitted");
    app.add_option("--seed", flag_values["seed"], "seed for random fields (default 0)");
    app.add_flag("--all-steps", all_steps, "measure the H1 error at every step and report the running max");
    app.add_flag("--no-timing", no_timing, "write 0 in the runtime column");

    auto* run_cmd = app.add_subcommand("run", "time-step the flow and write per-step diagnostics");
    auto* converge_cmd = app.add_subcommand("converge", "convergence study with EOC columns");
    auto* defect_cmd = app.add_subcommand("defect", "consistency defect under simultaneous h, tau refinement");
    auto* check_cmd = app.add_subcommand("check", "run the seeded property suites");
    for (auto* sub : {run_cmd, converge_cmd, defect_cmd, check_cmd}) sub->fallthrough();

    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    CliConfig cfg;
    if (run_cmd->parsed()) cfg.subcommand = Subcommand::run;
    if (converge_cmd->parsed()) cfg.subcommand = Subcommand::converge;
    if (defect_cmd->parsed()) cfg.subcommand = Subcommand::defect;
    if (check_cmd->parsed()) cfg.subcommand = Subcommand::check;

    if (!config_file.empty()) {
        cfg.config_file = config_file;
        for (const auto& [key, token] : read_config_file(config_file)) apply_value(cfg, key, token);
    }
    for (const auto& key : value_keys) {
        if (app.get_option("--" + key)->count() > 0) apply_value(cfg, key, flag_values[key]);
    }
    if (all_steps) cfg.all_steps = true;
    if (no_timing) cfg.no_timing = true;

    try {
        cfg.flow.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (cfg.subcommand != Subcommand::run && cfg.flow.initial_data == "random") {
        throw UsageError("solution 'random' has no closed form; only 'run' accepts it");
    }
    return cfg;
}

std::string format_real(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

namespace {

std::string format_optional(const std::optional<double>& value) {
    return value ? format_real(*value) : std::string("nan");
}

template <class Writer>
void write_atomically(const std::string& path, Writer&& writer) {
    const std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        writer(out);
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error("failed writing '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw std::runtime_error("cannot move output into place at '" + path + "'");
    }
}

}  // namespace

void write_csv(std::ostream& out, std::span<const StepRecord> records) {
    out << run_csv_header << '\n';
    for (const auto& r : records) {
        out << r.n << ',' << format_real(r.t) << ',' << format_real(r.energy) << ','
            << format_real(r.dissipation) << ',' << format_real(r.max_violation) << ','
            << format_real(r.l1_violation) << ',' << r.cg_iterations << '\n';
    }
}

void write_csv(std::ostream& out, const EocTable& table) {
    out << eoc_csv_header << '\n';
    for (const auto& r : table.rows) {
        const double h1 = table.all_steps ? r.h1_error_max : r.h1_error;
        const auto& eoc_h1 = table.all_steps ? r.eoc_h1_max : r.eoc_h1;
        out << r.n_mesh << ',' << format_real(r.h) << ',' << format_real(r.tau) << ','
            << format_real(r.l2_error) << ',' << format_real(h1) << ','
            << format_real(r.h1_error_normalized) << ',' << format_optional(r.eoc_l2) << ','
            << format_optional(eoc_h1) << ',' << format_real(r.runtime_seconds) << '\n';
    }
}

void emit_csv(std::span<const StepRecord> records, const std::string& path) {
    write_atomically(path, [&](std::ostream& out) { write_csv(out, records); });
}

void emit_csv(const EocTable& table, const std::string& path) {
    write_atomically(path, [&](std::ostream& out) { write_csv(out, table); });
}

namespace {

std::size_t threads_from_environment() {
    const char* raw = std::getenv("SPHEREFLOW_THREADS");
    if (raw == nullptr || *raw == '\0') return 1;
    const long long n = parse_integer("SPHEREFLOW_THREADS", raw);
    if (n < 1) throw UsageError("SPHEREFLOW_THREADS must be a positive count");
    return static_cast<std::size_t>(n);
}

template <class Writer>
void deliver(const std::string& path, std::ostream& out, Writer&& writer) {
    if (path.empty()) {
        writer(out);
    } else {
        write_atomically(path, writer);
    }
}

int cmd_run(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const Mesh mesh = build_unit_mesh(cfg.flow.dim, cfg.flow.n_mesh);
    const Field u0 = initial_field(cfg.flow, mesh);
    const RunResult result = run(cfg.flow, u0);
    if (result.step_condition_violated) {
        err << "warning: tau = " << cfg.flow.tau << " exceeds h^(1/2) = " << std::sqrt(mesh.h())
            << "; the error estimate assumes tau <= c h^(1/2)\n";
    }
    deliver(cfg.flow.output_path, out, [&](std::ostream& os) { write_csv(os, result.records); });
    return 0;
}

int cmd_converge(const CliConfig& cfg, std::size_t threads, std::ostream& out, std::ostream& err) {
    StudyOptions options;
    options.levels = cfg.levels;
    options.tau_rule = cfg.tau_rule;
    options.all_steps = cfg.all_steps;
    options.record_runtime = !cfg.no_timing;
    options.threads = threads;
    const EocTable table = convergence_study(cfg.flow, options);
    for (const auto& row : table.rows) {
        if (!satisfies_step_condition(row.tau, row.h)) {
            err << "warning: n = " << row.n_mesh << ": tau = " << row.tau << " exceeds h^(1/2)\n";
        }
    }
    deliver(cfg.flow.output_path, out, [&](std::ostream& os) { write_csv(os, table); });
    return 0;
}

int cmd_defect(const CliConfig& cfg, std::ostream& out) {
    const ExactSolution exact = exact_solution_by_name(cfg.flow.initial_data, cfg.flow.m, cfg.flow.dim);
    std::ostringstream table;
    table << "n_mesh,h,tau,n,t,defect_norm\n";
    for (std::size_t level = 0; level < cfg.levels; ++level) {
        const int n_mesh = cfg.flow.n_mesh << level;
        const double tau = cfg.flow.tau / static_cast<double>(1u << level);
        const std::size_t n = std::max<std::size_t>(1, step_count(cfg.flow.final_time, tau));
        const Mesh mesh = build_unit_mesh(cfg.flow.dim, n_mesh);
        const double norm = defect_norm(exact, mesh, tau, n, cfg.flow.quadrature_order, cfg.flow.solver_tol);
        table << n_mesh << ',' << format_real(mesh.h()) << ',' << format_real(tau) << ',' << n << ','
              << format_real(static_cast<double>(n) * tau) << ',' << format_real(norm) << '\n';
    }
    deliver(cfg.flow.output_path, out, [&](std::ostream& os) { os << table.str(); });
    return 0;
}

int cmd_check(const CliConfig& cfg, std::ostream& out) {
    bool all = true;
    for (const auto& s : run_property_suites(cfg.flow.seed)) {
        out << (s.passed ? "PASS " : "FAIL ") << s.name << " (worst " << format_real(s.worst)
            << ", tolerance " << format_real(s.tolerance) << ")\n";
        all = all && s.passed;
    }
    return all ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CliConfig cfg;
    std::size_t threads = 1;
    try {
        cfg = parse_args(argv);
        threads = threads_from_environment();
    } catch (const HelpRequested& help) {
        out << help.what();
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    }
    try {
        switch (cfg.subcommand) {
            case Subcommand::run: return cmd_run(cfg, out, err);
            case Subcommand::converge: return cmd_converge(cfg, threads, out, err);
            case Subcommand::defect: return cmd_defect(cfg, out);
            case Subcommand::check: return cmd_check(cfg, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace sphereflow
