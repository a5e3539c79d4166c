#include "sphereflow/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sphereflow/rng.hpp"
#include "sphereflow/tangent.hpp"

namespace sphereflow {

namespace {

constexpr double pi = std::numbers::pi;

struct Phase {
    double theta;
    Point grad;
};

Phase phase_angle(int dim, double t, const Point& x) {
    const double decay = std::exp(-dim * pi * pi * t);
    std::array<double, 3> c{1.0, 1.0, 1.0}, s{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) {
        c[static_cast<std::size_t>(k)] = std::cos(pi * x[static_cast<std::size_t>(k)]);
        s[static_cast<std::size_t>(k)] = std::sin(pi * x[static_cast<std::size_t>(k)]);
    }
    Phase p{decay * c[0] * c[1] * c[2], {}};
    for (int k = 0; k < dim; ++k) {
        double g = -decay * pi * s[static_cast<std::size_t>(k)];
        for (int j = 0; j < dim; ++j)
            if (j != k) g *= c[static_cast<std::size_t>(j)];
        p.grad[static_cast<std::size_t>(k)] = g;
    }
    return p;
}

}  // namespace

ExactSolution exact_phase_solution(std::size_t m, int dim) {
    if (m < 2) throw std::invalid_argument("exact_phase_solution: m must be at least 2");
    if (dim < 1 || dim > 3) throw std::invalid_argument("exact_phase_solution: d must be 1, 2 or 3");
    ExactSolution f;
    f.m = m;
    f.dim = dim;
    f.value = [m, dim](double t, const Point& x) {
        const double th = phase_angle(dim, t, x).theta;
        Vector v(m, 0.0);
        v[0] = std::cos(th);
        v[1] = std::sin(th);
        return v;
    };
    f.gradient = [m, dim](double t, const Point& x) {
        const Phase p = phase_angle(dim, t, x);
        const auto d = static_cast<std::size_t>(dim);
        Vector g(m * d, 0.0);
        for (std::size_t k = 0; k < d; ++k) {
            g[k] = -std::sin(p.theta) * p.grad[k];
            g[d + k] = std::cos(p.theta) * p.grad[k];
        }
        return g;
    };
    f.time_derivative = [m, dim](double t, const Point& x) {
        const double th = phase_angle(dim, t, x).theta;
        const double th_t = -dim * pi * pi * th;
        Vector v(m, 0.0);
        v[0] = -std::sin(th) * th_t;
        v[1] = std::cos(th) * th_t;
        return v;
    };
    std::ostringstream os;
    os << "phase solution (cos theta, sin theta), theta = exp(-" << dim
       << " pi^2 t) prod cos(pi x_k), m = " << m;
    f.description = os.str();
    return f;
}

ExactSolution exact_constant_solution(std::size_t m, int dim) {
    if (m < 2) throw std::invalid_argument("exact_constant_solution: m must be at least 2");
    ExactSolution f;
    f.m = m;
    f.dim = dim;
    f.value = [m](double, const Point&) {
        Vector v(m, 0.0);
        v[0] = 1.0;
        return v;
    };
    f.gradient = [m, dim](double, const Point&) { return Vector(m * static_cast<std::size_t>(dim), 0.0); };
    f.time_derivative = [m](double, const Point&) { return Vector(m, 0.0); };
    f.description = "constant solution e_1";
    return f;
}

ExactSolution exact_solution_by_name(const std::string& name, std::size_t m, int dim) {
    if (name == "phase") return exact_phase_solution(m, dim);
    if (name == "constant") return exact_constant_solution(m, dim);
    throw std::invalid_argument("no closed-form solution named '" + name + "'");
}

Field random_unit_field(const Mesh& mesh, std::size_t m, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Field u(mesh, m);
    for (std::size_t z = 0; z < u.num_nodes(); ++z) {
        auto node = u.node(z);
        double r = 0.0;
        while (r < 1e-3) {
            for (double& c : node) c = rng.normal();
            r = norm2(node);
        }
        for (double& c : node) c /= r;
    }
    return u;
}

Field initial_field(const FlowConfig& config, const Mesh& mesh) {
    if (config.initial_data == "random") return random_unit_field(mesh, config.m, config.seed);
    return interpolate_nodal(exact_solution_by_name(config.initial_data, config.m, mesh.dim()), mesh, 0.0);
}

double defect_norm(const ExactSolution& f, const Mesh& mesh, double tau, std::size_t n,
                   int quadrature_order, double solver_tol, double floor) {
    if (n < 1) throw std::invalid_argument("defect_norm: step index must be at least 1");
    if (!(tau > 0.0)) throw std::invalid_argument("defect_norm: tau must be positive");
    const std::size_t m = f.m;
    const double t_n = static_cast<double>(n) * tau;
    const Field prev = ritz_project(f, t_n - tau, mesh, quadrature_order, solver_tol);
    const Field curr = ritz_project(f, t_n, mesh, quadrature_order, solver_tol);
    const Field u_hat = normalize_nodal(prev, floor);
    const TangentFrame frame(u_hat);
    const FlowOperators ops = FlowOperators::assemble(mesh);

    const std::size_t full = mesh.num_vertices() * m;
    Vector dt(full);
    for (std::size_t i = 0; i < full; ++i)
        dt[i] = (curr.coefficients()[i] - prev.coefficients()[i]) / tau;
    Vector rhs = spmv_block(ops.mass, dt, m);
    const Vector au = spmv_block(ops.stiffness, curr.coefficients(), m);
    for (std::size_t i = 0; i < full; ++i) rhs[i] += au[i];
    const Vector b = frame.reduce(rhs);

    Vector v(full), mv(full);
    const LinearOperator apply = [&](std::span<const double> alpha, std::span<double> out) {
        frame.expand(alpha, v);
        ops.mass.multiply_block(v, mv, m);
        frame.reduce(mv, out);
    };
    const CgResult sol = cg_solve(apply, b, solver_tol);
    // ||F alpha||_{L2} with the consistent mass matrix.
    const Vector fa = frame.expand(sol.x);
    return std::sqrt(std::max(0.0, dot(fa, spmv_block(ops.mass, fa, m))));
}

OracleStep saddle_point_step_oracle(const FlowState& state, const FlowOperators& ops, double floor) {
    const Field& u = state.u;
    const std::size_t m = u.m();
    const std::size_t nodes = u.num_nodes();
    const std::size_t nv = nodes * m;
    const std::size_t total = nv + nodes;
    if (total > 400) {
        std::ostringstream os;
        os << "saddle_point_step_oracle: " << total << " unknowns exceed the cap of 400";
        throw std::invalid_argument(os.str());
    }
    const double tau = state.tau;
    const Field u_hat = normalize_nodal(u, floor);

    DenseMatrix kkt(total, total);
    const DenseMatrix mass = DenseMatrix::from_sparse(ops.mass);
    const DenseMatrix stiff = DenseMatrix::from_sparse(ops.stiffness);
    for (std::size_t i = 0; i < nodes; ++i)
        for (std::size_t j = 0; j < nodes; ++j) {
            const double kij = mass(i, j) + tau * stiff(i, j);
            for (std::size_t c = 0; c < m; ++c) kkt(i * m + c, j * m + c) = kij;
        }
    for (std::size_t z = 0; z < nodes; ++z)
        for (std::size_t c = 0; c < m; ++c) {
            kkt(nv + z, z * m + c) = u_hat.node(z)[c];
            kkt(z * m + c, nv + z) = u_hat.node(z)[c];
        }

    Vector rhs(total, 0.0);
    for (std::size_t i = 0; i < nodes; ++i)
        for (std::size_t j = 0; j < nodes; ++j)
            for (std::size_t c = 0; c < m; ++c) rhs[i * m + c] -= stiff(i, j) * u.node(j)[c];

    const Vector sol = dense_solve(std::move(kkt), rhs);

    OracleStep out{state, Vector(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(nv)),
                   Vector(sol.begin() + static_cast<std::ptrdiff_t>(nv), sol.end())};
    auto& coeffs = out.state.u.coefficients();
    for (std::size_t i = 0; i < nv; ++i) coeffs[i] += tau * out.velocity[i];
    out.state.n = state.n + 1;
    out.state.t = static_cast<double>(out.state.n) * tau;
    return out;
}

std::optional<double> eoc(double e_coarse, double e_fine) {
    constexpr double noise_floor = 1e-12;
    if (!(e_coarse > 0.0) || !(e_fine > 0.0)) return std::nullopt;
    if (e_coarse < noise_floor && e_fine < noise_floor) return std::nullopt;
    return std::log2(e_coarse / e_fine);
}

TauRule parse_tau_rule(const std::string& text) {
    if (text == "tau=h/4") return TauRule::quarter_h;
    if (text == "tau=sqrt_h/8") return TauRule::sqrt_h_over_8;
    if (text == "fixed") return TauRule::fixed;
    throw std::invalid_argument("unknown tau rule '" + text + "'");
}

std::string to_string(TauRule rule) {
    switch (rule) {
        case TauRule::quarter_h: return "tau=h/4";
        case TauRule::sqrt_h_over_8: return "tau=sqrt_h/8";
        case TauRule::fixed: return "fixed";
    }
    return "fixed";
}

double tau_for_level(TauRule rule, int n_mesh, double base_tau) {
    const double spacing = 1.0 / n_mesh;
    switch (rule) {
        case TauRule::quarter_h: return spacing / 4.0;
        case TauRule::sqrt_h_over_8: return std::sqrt(spacing) / 8.0;
        case TauRule::fixed: return base_tau;
    }
    return base_tau;
}

namespace {

EocRow run_level(const FlowConfig& config, const ExactSolution& exact, const StudyOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const Mesh mesh = build_unit_mesh(config.dim, config.n_mesh);
    const Field u0 = initial_field(config, mesh);
    const FlowOperators ops = FlowOperators::assemble(mesh);
    const std::size_t nodes = mesh.num_vertices();

    EocRow row;
    row.n_mesh = config.n_mesh;
    row.h = mesh.h();
    row.tau = config.tau;
    row.steps = step_count(config.final_time, config.tau);
    row.final_time = static_cast<double>(row.steps) * config.tau;

    const double e0 = energy(ops.stiffness, u0);
    double dissipated = 0.0;
    double running_max = options.all_steps ? error_norms(u0, exact, 0.0, config.quadrature_order).h1 : 0.0;
    Vector growth(nodes, 0.0);
    Vector initial_sq(nodes);
    for (std::size_t z = 0; z < nodes; ++z) initial_sq[z] = dot(u0.node(z), u0.node(z));

    const StepObserver observer = [&](const StepResult& sr) {
        dissipated += sr.record.dissipation;
        row.worst_energy_slack = std::max(row.worst_energy_slack, sr.record.energy + dissipated - e0);
        const double tau2 = sr.state.tau * sr.state.tau;
        for (std::size_t z = 0; z < nodes; ++z) {
            const auto d = sr.dt_u.node(z);
            growth[z] += tau2 * dot(d, d);
            const auto u = sr.state.u.node(z);
            row.worst_constraint_identity = std::max(
                row.worst_constraint_identity, std::abs(dot(u, u) - initial_sq[z] - growth[z]));
        }
        if (options.all_steps) {
            running_max = std::max(running_max,
                                   error_norms(sr.state.u, exact, sr.state.t, config.quadrature_order).h1);
        }
    };
    const RunResult result = run(config, u0, observer);

    const ErrorNorms raw = error_norms(result.final_field, exact, row.final_time, config.quadrature_order);
    const ErrorNorms normalized =
        error_norms(postprocess_normalize(result.final_field), exact, row.final_time, config.quadrature_order);
    row.l2_error = raw.l2;
    row.h1_error = raw.h1;
    row.h1_error_normalized = normalized.h1;
    row.h1_error_max = options.all_steps ? std::max(running_max, raw.h1) : raw.h1;
    if (options.record_runtime) {
        row.runtime_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return row;
}

}  // namespace

EocTable convergence_study(const FlowConfig& base, const StudyOptions& options) {
    if (options.levels < 2) throw std::invalid_argument("convergence_study: levels must be at least 2");
    base.validate();
    const ExactSolution exact = exact_solution_by_name(base.initial_data, base.m, base.dim);

    std::vector<FlowConfig> configs;
    for (std::size_t level = 0; level < options.levels; ++level) {
        FlowConfig c = base;
        c.n_mesh = base.n_mesh << level;
        c.tau = tau_for_level(options.tau_rule, c.n_mesh, base.tau);
        configs.push_back(c);
    }

    EocTable table;
    table.all_steps = options.all_steps;
    table.rows.resize(configs.size());
    const std::size_t workers = std::max<std::size_t>(1, options.threads);
    for (std::size_t first = 0; first < configs.size(); first += workers) {
        const std::size_t last = std::min(configs.size(), first + workers);
        if (workers == 1) {
            table.rows[first] = run_level(configs[first], exact, options);
            continue;
        }
        std::vector<std::future<EocRow>> pending;
        for (std::size_t i = first; i < last; ++i)
            pending.push_back(std::async(std::launch::async, run_level, std::cref(configs[i]),
                                         std::cref(exact), std::cref(options)));
        for (std::size_t i = first; i < last; ++i) table.rows[i] = pending[i - first].get();
    }

    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        const EocRow& c = table.rows[i - 1];
        EocRow& f = table.rows[i];
        f.eoc_l2 = eoc(c.l2_error, f.l2_error);
        f.eoc_h1 = eoc(c.h1_error, f.h1_error);
        f.eoc_h1_normalized = eoc(c.h1_error_normalized, f.h1_error_normalized);
        f.eoc_h1_max = eoc(c.h1_error_max, f.h1_error_max);
    }
    return table;
}

namespace {

Field random_field(const Mesh& mesh, std::size_t m, SplitMix64& rng) {
    Field v(mesh, m);
    for (double& c : v.coefficients()) c = rng.uniform(-1.0, 1.0);
    return v;
}

Field random_state(const Mesh& mesh, std::size_t m, SplitMix64& rng) {
    Field u = random_unit_field(mesh, m, rng.next());
    for (std::size_t z = 0; z < u.num_nodes(); ++z) {
        const double r = rng.uniform(0.5, 2.0);
        for (double& c : u.node(z)) c *= r;
    }
    return u;
}

SuiteOutcome projection_suite(SplitMix64& rng) {
    SuiteOutcome out{"projection algebra", true, 0.0, 1e-12};
    for (int d : {1, 2}) {
        const Mesh mesh = build_unit_mesh(d, d == 1 ? 16 : 4);
        const Vector beta = lumped_weights(mesh);
        for (std::size_t m : {std::size_t{2}, std::size_t{3}}) {
            for (int trial = 0; trial < 20; ++trial) {
                const Field u_hat = random_unit_field(mesh, m, rng.next());
                const TangentFrame frame(u_hat);
                const Field v = random_field(mesh, m, rng);
                const Field w = random_field(mesh, m, rng);
                const Field pv = project_nodal(u_hat, v);
                const Field pw = project_nodal(u_hat, w);
                double worst = std::abs(lumped_inner(beta, pv, w) - lumped_inner(beta, v, pw));
                for (std::size_t z = 0; z < pv.num_nodes(); ++z)
                    worst = std::max(worst, std::abs(dot(pv.node(z), u_hat.node(z))));
                Vector alpha(frame.reduced_size());
                for (double& a : alpha) a = rng.uniform(-1.0, 1.0);
                const Field t(mesh, m, frame.expand(alpha));
                Field diff = v;
                for (std::size_t i = 0; i < diff.coefficients().size(); ++i)
                    diff.coefficients()[i] -= pv.coefficients()[i];
                worst = std::max(worst, std::abs(lumped_inner(beta, diff, t)));
                out.worst = std::max(out.worst, worst);
            }
        }
    }
    out.passed = out.worst <= out.tolerance;
    return out;
}

struct RoughRunStats {
    double energy_slack = 0.0;
    double constraint_identity = 0.0;
};

RoughRunStats rough_run(std::uint64_t seed) {
    const Mesh mesh = build_unit_mesh(2, 8);
    FlowConfig config;
    config.dim = 2;
    config.n_mesh = 8;
    config.m = 3;
    config.tau = 1.0 / 32.0;
    config.final_time = 0.25;
    const Field u0 = random_unit_field(mesh, 3, seed);
    const FlowOperators ops = FlowOperators::assemble(mesh);
    const double e0 = energy(ops.stiffness, u0);
    RoughRunStats stats;
    double dissipated = 0.0;
    Vector growth(mesh.num_vertices(), 0.0);
    run(config, u0, [&](const StepResult& sr) {
        dissipated += sr.record.dissipation;
        stats.energy_slack = std::max(stats.energy_slack, sr.record.energy + dissipated - e0 * (1.0 + 1e-8));
        for (std::size_t z = 0; z < mesh.num_vertices(); ++z) {
            const auto d = sr.dt_u.node(z);
            growth[z] += sr.state.tau * sr.state.tau * dot(d, d);
            const auto u = sr.state.u.node(z);
            stats.constraint_identity =
                std::max(stats.constraint_identity, std::abs(dot(u, u) - 1.0 - growth[z]));
        }
    });
    return stats;
}

SuiteOutcome oracle_suite(SplitMix64& rng) {
    SuiteOutcome out{"oracle equivalence", true, 0.0, 1e-9};
    for (auto [d, n] : {std::pair{1, 12}, std::pair{2, 4}, std::pair{3, 2}}) {
        const Mesh mesh = build_unit_mesh(d, n);
        const FlowOperators ops = FlowOperators::assemble(mesh);
        for (std::size_t m : {std::size_t{2}, std::size_t{3}}) {
            for (int trial = 0; trial < 3; ++trial) {
                const FlowState s{random_state(mesh, m, rng), 0, 0.05, 0.0};
                const StepResult a = step(s, ops);
                const OracleStep b = saddle_point_step_oracle(s, ops);
                for (std::size_t i = 0; i < b.state.u.coefficients().size(); ++i)
                    out.worst = std::max(out.worst, std::abs(a.state.u.coefficients()[i] -
                                                             b.state.u.coefficients()[i]));
            }
        }
    }
    out.passed = out.worst <= out.tolerance;
    return out;
}

}  // namespace

std::vector<SuiteOutcome> run_property_suites(std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<SuiteOutcome> outcomes;
    outcomes.push_back(projection_suite(rng));
    const RoughRunStats rough = rough_run(rng.next());
    outcomes.push_back({"energy law", rough.energy_slack <= 1e-10, std::max(0.0, rough.energy_slack), 1e-10});
    outcomes.push_back({"constraint identity", rough.constraint_identity <= 1e-9, rough.constraint_identity, 1e-9});
    outcomes.push_back(oracle_suite(rng));
    return outcomes;
}

}  // namespace sphereflow
