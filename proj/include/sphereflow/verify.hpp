#pragma once

/// @file verify.hpp
/// @brief Reference solutions, consistency defects, a dense KKT step oracle
/// and the convergence-order harness.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sphereflow/fem.hpp"
#include "sphereflow/flow.hpp"

namespace sphereflow {

/// u = (cos theta, sin theta, 0, ..., 0) with
/// theta(t, x) = exp(-d pi^2 t) prod_k cos(pi x_k). theta solves the Neumann heat
/// equation, which makes u a smooth solution of the sphere-valued flow.
ExactSolution exact_phase_solution(std::size_t m, int dim);

/// Stationary solution u = e_1.
ExactSolution exact_constant_solution(std::size_t m, int dim);

/// "phase" or "constant".
ExactSolution exact_solution_by_name(const std::string& name, std::size_t m, int dim);

/// Independent unit vectors at every node, drawn from SplitMix64(seed).
Field random_unit_field(const Mesh& mesh, std::size_t m, std::uint64_t seed);

/// Nodal interpolant of the configured initial data at t = 0.
Field initial_field(const FlowConfig& config, const Mesh& mesh);

/// L2 norm of the tangent-space Riesz representative of the scheme residual
/// evaluated at the Ritz projections u_*^{n-1}, u_*^n of the exact solution.
double defect_norm(const ExactSolution& f, const Mesh& mesh, double tau, std::size_t n,
                   int quadrature_order, double solver_tol = 1e-12, double floor = 0.5);

struct OracleStep {
    FlowState state;
    /// Discrete time derivative d_t u.
    Vector velocity;
    /// One multiplier per node.
    Vector multipliers;
};

/// Solves the dense KKT system of one step,
///   [(M + tau A) (x) I   B^T] [v     ]   [-(A (x) I) u]
///   [B                    0 ] [lambda] = [0           ],
/// with row z of B equal to u_hat(z)^T on node z. Capped at 400 unknowns.
OracleStep saddle_point_step_oracle(const FlowState& state, const FlowOperators& ops,
                                    double floor = default_normalization_floor);

/// log2(coarse / fine); empty when either error is nonpositive or both sit
/// below the 1e-12 noise floor.
std::optional<double> eoc(double e_coarse, double e_fine);

enum class TauRule {
    quarter_h,      ///< tau = h/4
    sqrt_h_over_8,  ///< tau = sqrt(h)/8
    fixed,          ///< tau from the base configuration
};

/// Accepts "tau=h/4", "tau=sqrt_h/8" and "fixed".
TauRule parse_tau_rule(const std::string& text);
std::string to_string(TauRule rule);

/// Step size for a level; h here is the grid spacing 1/n_mesh.
double tau_for_level(TauRule rule, int n_mesh, double base_tau);

struct EocRow {
    int n_mesh = 0;
    double h = 0.0;
    double tau = 0.0;
    std::size_t steps = 0;
    double final_time = 0.0;
    double l2_error = 0.0;
    double h1_error = 0.0;
    double h1_error_normalized = 0.0;
    /// max over n of the H1 error; equals h1_error unless every step is measured.
    double h1_error_max = 0.0;
    std::optional<double> eoc_l2;
    std::optional<double> eoc_h1;
    std::optional<double> eoc_h1_normalized;
    std::optional<double> eoc_h1_max;
    double runtime_seconds = 0.0;
    /// Energy law and nodal constraint identity residuals observed during the run.
    double worst_energy_slack = 0.0;
    double worst_constraint_identity = 0.0;
};

struct EocTable {
    std::vector<EocRow> rows;
    bool all_steps = false;
};

struct StudyOptions {
    std::size_t levels = 2;
    TauRule tau_rule = TauRule::quarter_h;
    /// Measure the H1 error after every step and keep the running maximum.
    bool all_steps = false;
    /// Zero the runtime column so repeated studies produce identical output.
    bool record_runtime = true;
    /// Levels evaluated concurrently.
    std::size_t threads = 1;
};

/// Runs the flow on n_mesh, 2 n_mesh, ... and fills the EOC columns.
EocTable convergence_study(const FlowConfig& base, const StudyOptions& options);

struct SuiteOutcome {
    std::string name;
    bool passed = false;
    double worst = 0.0;
    double tolerance = 0.0;
};

/// Seeded property suites: projection algebra, energy law, constraint
/// identity and oracle equivalence.
std::vector<SuiteOutcome> run_property_suites(std::uint64_t seed);

}  // namespace sphereflow
