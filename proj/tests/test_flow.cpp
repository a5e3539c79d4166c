#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "sphereflow/flow.hpp"
#include "sphereflow/rng.hpp"
#include "sphereflow/verify.hpp"

using namespace sphereflow;

namespace {

double max_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

FlowConfig phase_config(int dim, int n, double tau, double T) {
    FlowConfig c;
    c.dim = dim;
    c.n_mesh = n;
    c.m = 2;
    c.tau = tau;
    c.final_time = T;
    c.initial_data = "phase";
    return c;
}

}  // namespace

TEST_CASE("constant data is stationary") {
    const Mesh mesh = build_unit_mesh(2, 4);
    const FlowOperators ops = FlowOperators::assemble(mesh);
    const Field u0 = interpolate_nodal(exact_constant_solution(3, 2), mesh, 0.0);
    const StepResult r = step(FlowState{u0, 0, 0.1, 0.0}, ops);
    for (double x : r.dt_u.coefficients()) CHECK(x == 0.0);
    CHECK(r.state.u.coefficients() == u0.coefficients());
    CHECK(r.state.n == 1);
    CHECK(r.state.t == doctest::Approx(0.1));
    CHECK(r.record.energy == 0.0);
    CHECK(r.record.max_violation == 0.0);

    FlowConfig c;
    c.dim = 2;
    c.n_mesh = 4;
    c.m = 3;
    c.tau = 0.1;
    c.final_time = 1.0;
    c.initial_data = "constant";
    const RunResult run_result = run(c, u0);
    CHECK(run_result.records.size() == 11);
    for (const auto& rec : run_result.records) {
        CHECK(rec.energy == 0.0);
        CHECK(rec.max_violation == 0.0);
        CHECK(rec.l1_violation == 0.0);
    }
}

TEST_CASE("one step on d=1, n=2 matches the saddle-point oracle") {
    const Mesh mesh = build_unit_mesh(1, 2);
    const FlowOperators ops = FlowOperators::assemble(mesh);
    const Field u0(mesh, 2, Vector{1, 0, 0, 1, 1, 0});
    const FlowState s{u0, 0, 0.1, 0.0};
    const StepResult r = step(s, ops);
    const OracleStep o = saddle_point_step_oracle(s, ops);
    CHECK(max_diff(r.state.u.coefficients(), o.state.u.coefficients()) <= 1e-10);
    CHECK(max_diff(r.dt_u.coefficients(), o.velocity) <= 1e-10);
}

TEST_CASE("step satisfies the energy law and the tangent constraint") {
    SplitMix64 rng(4);
    for (int d = 1; d <= 3; ++d) {
        const Mesh mesh = build_unit_mesh(d, d == 3 ? 3 : 6);
        const FlowOperators ops = FlowOperators::assemble(mesh);
        for (std::size_t m : {2u, 3u}) {
            const Field u0 = random_unit_field(mesh, m, rng.next());
            for (double tau : {0.5, 0.05, 0.001}) {
                const StepResult r = step(FlowState{u0, 0, tau, 0.0}, ops);
                const double e0 = energy(ops.stiffness, u0);
                CHECK(r.record.energy + r.record.dissipation <= e0 + 1e-10);
                CHECK(in_tangent_space(r.u_hat, r.dt_u, 1e-10));
                CHECK(r.record.cg_iterations > 0);
                CHECK(r.record.dissipation == doctest::Approx(tau * mass_norm_squared(ops.mass, r.dt_u)));
            }
        }
    }
}

TEST_CASE("the solution does not depend on frame orientation") {
    SplitMix64 rng(12);
    const Mesh mesh = build_unit_mesh(2, 5);
    const FlowOperators ops = FlowOperators::assemble(mesh);
    for (std::size_t m : {2u, 3u, 4u}) {
        FlowState a{random_unit_field(mesh, m, rng.next()), 0, 0.02, 0.0};
        FlowState b = a;
        for (int k = 0; k < 5; ++k) {
            a = step(a, ops, 1e-13, default_normalization_floor, FrameOrientation::standard).state;
            b = step(b, ops, 1e-13, default_normalization_floor, FrameOrientation::flipped).state;
        }
        CHECK(max_diff(a.u.coefficients(), b.u.coefficients()) <= 1e-10);
    }
}

TEST_CASE("step reports a breached normalization floor") {
    const Mesh mesh = build_unit_mesh(1, 2);
    const FlowOperators ops = FlowOperators::assemble(mesh);
    const Field u(mesh, 2, Vector{1, 0, 0.01, 0.0, 0, 1});
    try {
        (void)step(FlowState{u, 3, 0.1, 0.3}, ops);
        FAIL("expected StepError");
    } catch (const StepError& e) {
        CHECK(e.step() == 4);
        CHECK(e.time() == doctest::Approx(0.4));
        CHECK(e.min_modulus() == doctest::Approx(0.01));
    }
}

TEST_CASE("step_count and the step-size condition") {
    CHECK(step_count(0.25, 1.0 / 64.0) == 16);
    CHECK(step_count(0.3, 0.1) == 3);
    CHECK(step_count(0.05, 0.1) == 0);
    CHECK(satisfies_step_condition(0.1, 0.25));
    CHECK_FALSE(satisfies_step_condition(0.6, 0.25));
}

TEST_CASE("FlowConfig validation") {
    FlowConfig c;
    CHECK_NOTHROW(c.validate());
    c.tau = 0.0;
    CHECK_THROWS_WITH_AS(c.validate(), "tau must be positive", std::invalid_argument);
    c = FlowConfig{};
    c.m = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = FlowConfig{};
    c.initial_data = "spiral";
    CHECK_THROWS_WITH_AS(c.validate(), "unknown solution 'spiral'", std::invalid_argument);
    c = FlowConfig{};
    c.dim = 4;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("run with T < tau only emits the step-0 record") {
    const FlowConfig c = phase_config(1, 8, 0.1, 0.05);
    const Mesh mesh = build_unit_mesh(1, 8);
    const Field u0 = initial_field(c, mesh);
    const RunResult r = run(c, u0);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].n == 0);
    CHECK(r.records[0].t == 0.0);
    CHECK(r.records[0].dissipation == 0.0);
    CHECK(r.final_field.coefficients() == u0.coefficients());
}

TEST_CASE("run rejects mismatched initial data") {
    const FlowConfig c = phase_config(1, 8, 0.1, 0.5);
    const Mesh mesh = build_unit_mesh(2, 8);
    const Field u0 = interpolate_nodal(exact_phase_solution(2, 2), mesh, 0.0);
    CHECK_THROWS_AS((void)run(c, u0), std::invalid_argument);
}

TEST_CASE("phase run: energy decreases, violation grows and matches the nodal identity") {
    const FlowConfig c = phase_config(1, 16, 1.0 / 64.0, 0.25);
    const Mesh mesh = build_unit_mesh(1, 16);
    const FlowOperators ops = FlowOperators::assemble(mesh);
    const Field u0 = initial_field(c, mesh);

    Vector accumulated(mesh.num_vertices(), 0.0);
    double worst_identity = 0.0;
    double cumulative_diss = 0.0;
    const double e0 = energy(ops.stiffness, u0);
    double worst_energy = 0.0;
    const RunResult r = run(c, u0, [&](const StepResult& s) {
        for (std::size_t z = 0; z < mesh.num_vertices(); ++z) {
            double dt2 = 0.0, u2 = 0.0, u02 = 0.0;
            for (std::size_t k = 0; k < 2; ++k) {
                dt2 += s.dt_u.node(z)[k] * s.dt_u.node(z)[k];
                u2 += s.state.u.node(z)[k] * s.state.u.node(z)[k];
                u02 += u0.node(z)[k] * u0.node(z)[k];
            }
            accumulated[z] += c.tau * c.tau * dt2;
            worst_identity = std::max(worst_identity, std::abs(u2 - u02 - accumulated[z]));
        }
        cumulative_diss += s.record.dissipation;
        worst_energy = std::max(worst_energy, s.record.energy + cumulative_diss - e0);
    });
    REQUIRE(r.records.size() == 17);
    CHECK(worst_identity <= 1e-9);
    CHECK(worst_energy <= 1e-8 * (1.0 + e0));
    for (std::size_t i = 1; i < r.records.size(); ++i) {
        CHECK(r.records[i].n == i);
        CHECK(r.records[i].energy <= r.records[i - 1].energy);
        CHECK(r.records[i].max_violation >= r.records[i - 1].max_violation);
    }
    CHECK(r.records.back().max_violation > 0.0);

    const Vector beta = lumped_weights(mesh);
    double l1 = 0.0;
    for (std::size_t z = 0; z < beta.size(); ++z) l1 += beta[z] * accumulated[z];
    CHECK(std::abs(r.records.back().l1_violation - l1) <= 1e-9);
}

TEST_CASE("constraint violation is first order in tau") {
    const Mesh mesh = build_unit_mesh(1, 64);
    const auto final_l1 = [&](double tau) {
        const FlowConfig c = phase_config(1, 64, tau, 0.25);
        return run(c, initial_field(c, mesh)).records.back().l1_violation;
    };
    const double ratio = final_l1(1.0 / 64.0) / final_l1(1.0 / 128.0);
    CHECK(ratio >= 1.7);
    CHECK(ratio <= 2.3);
}

TEST_CASE("run is deterministic") {
    const FlowConfig c = phase_config(2, 6, 0.05, 0.3);
    const Mesh mesh = build_unit_mesh(2, 6);
    const RunResult a = run(c, initial_field(c, mesh));
    const RunResult b = run(c, initial_field(c, mesh));
    CHECK(a.final_field.coefficients() == b.final_field.coefficients());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].energy == b.records[i].energy);
        CHECK(a.records[i].cg_iterations == b.records[i].cg_iterations);
    }
}

TEST_CASE("constraint_violation and postprocess_normalize") {
    const Mesh mesh = build_unit_mesh(1, 2);
    const Vector beta = lumped_weights(mesh);
    const Field unit(mesh, 2, Vector{1, 0, 0, 1, -1, 0});
    const ConstraintViolation v0 = constraint_violation(unit, beta);
    CHECK(v0.max_nodal == 0.0);
    CHECK(v0.l1_lumped == 0.0);

    const double r = std::sqrt(2.0);
    const Field bumped(mesh, 2, Vector{1, 0, r, 0, 0, 1});
    const ConstraintViolation v1 = constraint_violation(bumped, beta);
    CHECK(v1.max_nodal == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(v1.l1_lumped == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS((void)constraint_violation(bumped, Vector{1.0}), std::invalid_argument);

    CHECK(postprocess_normalize(unit).coefficients() == unit.coefficients());
    const Field n = postprocess_normalize(bumped);
    CHECK(n.node(1)[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(n.node(1)[1] == 0.0);
}
