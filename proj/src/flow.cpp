#include "sphereflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sphereflow {

FlowOperators FlowOperators::assemble(const Mesh& mesh) {
    return {assemble_mass(mesh), assemble_stiffness(mesh), lumped_weights(mesh)};
}

namespace {

std::string step_message(const std::string& cause, std::size_t step, double t, double min_modulus) {
    std::ostringstream os;
    os << "step " << step << " (t = " << t << ", min nodal modulus " << min_modulus
       << ") failed: " << cause;
    return os.str();
}

}  // namespace

StepError::StepError(const std::string& cause, std::size_t step, double t, double min_modulus)
    : std::runtime_error(step_message(cause, step, t, min_modulus)),
      step_(step),
      t_(t),
      min_modulus_(min_modulus) {}

StepRecord describe_state(const Field& u, const FlowOperators& ops, std::size_t n, double t) {
    StepRecord rec;
    rec.n = n;
    rec.t = t;
    rec.energy = energy(ops.stiffness, u);
    const auto v = constraint_violation(u, ops.lumped);
    rec.max_violation = v.max_nodal;
    rec.l1_violation = v.l1_lumped;
    return rec;
}

StepResult step(const FlowState& state, const FlowOperators& ops, double solver_tol, double floor,
                FrameOrientation orientation) {
    const Field& u_prev = state.u;
    const Mesh& mesh = u_prev.mesh();
    const std::size_t m = u_prev.m();
    const std::size_t next_n = state.n + 1;
    const double tau = state.tau;
    const double next_t = static_cast<double>(next_n) * tau;

    try {
        Field u_hat = normalize_nodal(u_prev, floor);
        const TangentFrame frame(u_hat, orientation);

        // Reduced system F^T [(M + tau A) (x) I] F alpha = -F^T (A (x) I) u^{n-1}.
        const Vector au = spmv_block(ops.stiffness, u_prev.coefficients(), m);
        Vector rhs = frame.reduce(au);
        for (double& r : rhs) r = -r;

        const std::size_t full = mesh.num_vertices() * m;
        Vector v(full), mv(full), av(full);
        const LinearOperator apply = [&](std::span<const double> alpha, std::span<double> out) {
            frame.expand(alpha, v);
            ops.mass.multiply_block(v, mv, m);
            ops.stiffness.multiply_block(v, av, m);
            for (std::size_t i = 0; i < full; ++i) mv[i] += tau * av[i];
            frame.reduce(mv, out);
        };
        const CgResult sol = cg_solve(apply, rhs, solver_tol);

        Field dt_u(mesh, m, frame.expand(sol.x));
        Field u_next = u_prev;
        auto& coeffs = u_next.coefficients();
        for (std::size_t i = 0; i < full; ++i) coeffs[i] += tau * dt_u.coefficients()[i];

        StepRecord rec = describe_state(u_next, ops, next_n, next_t);
        rec.dissipation = tau * mass_norm_squared(ops.mass, dt_u);
        rec.cg_iterations = sol.iterations;

        return {FlowState{std::move(u_next), next_n, tau, next_t}, rec, std::move(dt_u),
                std::move(u_hat)};
    } catch (const NormalizationError& e) {
        throw StepError(e.what(), next_n, next_t, min_nodal_modulus(u_prev));
    } catch (const ConvergenceError& e) {
        throw StepError(e.what(), next_n, next_t, min_nodal_modulus(u_prev));
    }
}

void FlowConfig::validate() const {
    if (dim < 1 || dim > 3) throw std::invalid_argument("d must be 1, 2 or 3");
    if (n_mesh < 1) throw std::invalid_argument("n must be at least 1");
    if (m < 2) throw std::invalid_argument("m must be at least 2");
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (!(final_time >= 0.0)) throw std::invalid_argument("T must be nonnegative");
    if (!(solver_tol > 0.0)) throw std::invalid_argument("solver-tol must be positive");
    if (quadrature_order < 2) throw std::invalid_argument("quadrature order must be at least 2");
    if (initial_data != "phase" && initial_data != "constant" && initial_data != "random") {
        throw std::invalid_argument("unknown solution '" + initial_data + "'");
    }
}

std::size_t step_count(double final_time, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (final_time < tau) return 0;
    return static_cast<std::size_t>(std::floor(final_time / tau + 1e-12));
}

bool satisfies_step_condition(double tau, double h) { return tau <= std::sqrt(h); }

RunResult run(const FlowConfig& config, const Field& u0, const StepObserver& observer) {
    config.validate();
    const Mesh& mesh = u0.mesh();
    if (mesh.dim() != config.dim || u0.m() != config.m) {
        throw std::invalid_argument("run: initial field does not match the configured d and m");
    }
    const FlowOperators ops = FlowOperators::assemble(mesh);
    const std::size_t steps = step_count(config.final_time, config.tau);

    RunResult result{{}, u0, !satisfies_step_condition(config.tau, mesh.h())};
    result.records.reserve(steps + 1);
    result.records.push_back(describe_state(u0, ops, 0, 0.0));

    FlowState state{u0, 0, config.tau, 0.0};
    for (std::size_t n = 1; n <= steps; ++n) {
        StepResult sr = step(state, ops, config.solver_tol);
        result.records.push_back(sr.record);
        if (observer) observer(sr);
        state = std::move(sr.state);
    }
    result.final_field = std::move(state.u);
    return result;
}

Field postprocess_normalize(const Field& u, double floor) { return normalize_nodal(u, floor); }

ConstraintViolation constraint_violation(const Field& u, std::span<const double> beta) {
    if (beta.size() != u.num_nodes()) {
        throw std::invalid_argument("constraint_violation: weight count does not match nodes");
    }
    ConstraintViolation v;
    for (std::size_t z = 0; z < u.num_nodes(); ++z) {
        const auto node = u.node(z);
        const double dev = std::abs(dot(node, node) - 1.0);
        v.max_nodal = std::max(v.max_nodal, dev);
        v.l1_lumped += beta[z] * dev;
    }
    return v;
}

}  // namespace sphereflow
