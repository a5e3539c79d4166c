#pragma once

/// @file flow.hpp
/// @brief Fully discrete harmonic map heat flow with nodal tangent constraints.
///
/// One step: normalize the previous iterate at the nodes, find the discrete
/// time derivative in the tangent space of that direction field by solving the
/// reduced SPD system in a per-node tangent frame, then update
///
///     u^n = u^{n-1} + tau * d_t u^n.
///
/// Only the nodal directions of the previous iterate enter the constraint, so
/// |u^n(z)|^2 grows by exactly tau^2 |d_t u^n(z)|^2 per step.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sphereflow/fem.hpp"
#include "sphereflow/tangent.hpp"

namespace sphereflow {

/// Scalar matrices shared by every step on one mesh.
struct FlowOperators {
    SparseMatrix mass;
    SparseMatrix stiffness;
    Vector lumped;

    static FlowOperators assemble(const Mesh& mesh);
};

struct FlowState {
    Field u;
    std::size_t n = 0;
    double tau = 0.0;
    double t = 0.0;
};

struct StepRecord {
    std::size_t n = 0;
    double t = 0.0;
    double energy = 0.0;
    /// tau * ||d_t u^n||^2 with the consistent mass matrix.
    double dissipation = 0.0;
    double max_violation = 0.0;
    double l1_violation = 0.0;
    std::size_t cg_iterations = 0;
};

struct StepResult {
    FlowState state;
    StepRecord record;
    Field dt_u;
    Field u_hat;
};

/// Carries the state that failed to advance.
class StepError : public std::runtime_error {
public:
    StepError(const std::string& cause, std::size_t step, double t, double min_modulus);
    std::size_t step() const { return step_; }
    double time() const { return t_; }
    double min_modulus() const { return min_modulus_; }

private:
    std::size_t step_;
    double t_;
    double min_modulus_;
};

StepResult step(const FlowState& state, const FlowOperators& ops, double solver_tol = 1e-12,
                double floor = default_normalization_floor,
                FrameOrientation orientation = FrameOrientation::standard);

struct FlowConfig {
    int dim = 1;
    int n_mesh = 16;
    std::size_t m = 2;
    double tau = 1.0 / 64.0;
    double final_time = 0.25;
    /// "phase", "constant" or "random".
    std::string initial_data = "phase";
    double solver_tol = 1e-12;
    int quadrature_order = 2;
    std::string output_path;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// N = floor(T / tau + 1e-12).
std::size_t step_count(double final_time, double tau);

/// Step-size hypothesis tau <= c h^{1/2}, with c = 1.
bool satisfies_step_condition(double tau, double h);

/// Diagnostics of a state without a step attached (the step-0 record).
StepRecord describe_state(const Field& u, const FlowOperators& ops, std::size_t n, double t);

using StepObserver = std::function<void(const StepResult&)>;

struct RunResult {
    std::vector<StepRecord> records;
    Field final_field;
    bool step_condition_violated = false;
};

/// Runs step_count(T, tau) steps from u0 and returns the step-0 record plus one
/// record per step. The observer sees every step as it completes.
RunResult run(const FlowConfig& config, const Field& u0, const StepObserver& observer = {});

/// Nodewise rescaling of an iterate to unit length.
Field postprocess_normalize(const Field& u, double floor = default_normalization_floor);

struct ConstraintViolation {
    double max_nodal = 0.0;
    double l1_lumped = 0.0;
};

/// max_z ||u(z)|^2 - 1| and sum_z beta_z ||u(z)|^2 - 1|.
ConstraintViolation constraint_violation(const Field& u, std::span<const double> beta);

}  // namespace sphereflow
