// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sphereflow/flow.hpp"
#include "sphereflow/quadrature.hpp"
#include "sphereflow/rng.hpp"
#include "sphereflow/tangent.hpp"
#include "sphereflow/verify.hpp"

using namespace sphereflow;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool passed = true;
    std::ostringstream detail;

    void require(bool ok) { passed = passed && ok; }
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string show(const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("undefined");
}

bool in_band(const std::optional<double>& v, double lo, double hi) {
    return v && *v >= lo && *v <= hi;
}

FlowConfig phase_config(int dim, int n, std::size_t m, double T) {
    FlowConfig c;
    c.dim = dim;
    c.n_mesh = n;
    c.m = m;
    c.final_time = T;
    c.initial_data = "phase";
    return c;
}

double initial_energy(const FlowConfig& c) {
    const Mesh mesh = build_unit_mesh(c.dim, c.n_mesh);
    return energy(assemble_stiffness(mesh), initial_field(c, mesh));
}

// Per-step energy and nodal identity residuals of one run.
struct LawCheck {
    double worst_energy_excess = 0.0;  // E^n + sum diss - E^0 (1 + 1e-8) - 1e-10, should stay <= 0
    double worst_identity = 0.0;
};

LawCheck check_laws(const FlowConfig& c, const Field& u0) {
    const Mesh& mesh = u0.mesh();
    const double e0 = energy(assemble_stiffness(mesh), u0);
    LawCheck out;
    out.worst_energy_excess = -1e300;
    Vector accumulated(mesh.num_vertices(), 0.0);
    double diss = 0.0;
    (void)run(c, u0, [&](const StepResult& s) {
        diss += s.record.dissipation;
        out.worst_energy_excess =
            std::max(out.worst_energy_excess, s.record.energy + diss - e0 * (1.0 + 1e-8) - 1e-10);
        for (std::size_t z = 0; z < mesh.num_vertices(); ++z) {
            double dt2 = 0.0, u2 = 0.0;
            for (std::size_t k = 0; k < c.m; ++k) {
                dt2 += s.dt_u.node(z)[k] * s.dt_u.node(z)[k];
                u2 += s.state.u.node(z)[k] * s.state.u.node(z)[k];
            }
            accumulated[z] += c.tau * c.tau * dt2;
            out.worst_identity = std::max(out.worst_identity, std::abs(u2 - 1.0 - accumulated[z]));
        }
    });
    return out;
}

struct StudyEvidence {
    EocTable table;
    double seconds = 0.0;
    Vector e0;
};

StudyEvidence& criterion1_study() {
    static StudyEvidence ev = [] {
        StudyEvidence e;
        const FlowConfig c = phase_config(1, 8, 2, 0.25);
        StudyOptions o;
        o.levels = 5;
        o.all_steps = true;
        const auto start = Clock::now();
        e.table = convergence_study(c, o);
        e.seconds = seconds_since(start);
        for (const auto& row : e.table.rows) e.e0.push_back(initial_energy(phase_config(1, row.n_mesh, 2, 0.25)));
        return e;
    }();
    return ev;
}

StudyEvidence& criterion2_study() {
    static StudyEvidence ev = [] {
        StudyEvidence e;
        const FlowConfig c = phase_config(2, 4, 3, 0.1);
        StudyOptions o;
        o.levels = 4;
        o.all_steps = true;
        const auto start = Clock::now();
        e.table = convergence_study(c, o);
        e.seconds = seconds_since(start);
        for (const auto& row : e.table.rows) e.e0.push_back(initial_energy(phase_config(2, row.n_mesh, 3, 0.1)));
        return e;
    }();
    return ev;
}

FlowConfig rough_config() {
    FlowConfig c;
    c.dim = 2;
    c.n_mesh = 16;
    c.m = 3;
    c.tau = 1.0 / 64.0;
    c.final_time = 0.5;
    c.initial_data = "random";
    c.seed = 2024;
    return c;
}

const LawCheck& rough_laws() {
    static const LawCheck laws = [] {
        const FlowConfig c = rough_config();
        const Mesh mesh = build_unit_mesh(c.dim, c.n_mesh);
        return check_laws(c, random_unit_field(mesh, c.m, c.seed));
    }();
    return laws;
}

void criterion1(Outcome& o) {
    const auto& ev = criterion1_study();
    const auto& last = ev.table.rows.back();
    o.require(in_band(last.eoc_h1, 0.85, 1.3));
    o.require(in_band(last.eoc_h1_max, 0.85, 1.3));
    o.require(in_band(last.eoc_h1_normalized, 0.85, 1.3));
    o.require(ev.seconds < 60.0);
    o.detail << "eoc_h1 " << show(last.eoc_h1) << ", running max " << show(last.eoc_h1_max) << ", normalized "
             << show(last.eoc_h1_normalized) << ", eoc_l2 " << show(last.eoc_l2) << ", " << ev.seconds << " s";
}

void criterion2(Outcome& o) {
    const auto& ev = criterion2_study();
    const auto& last = ev.table.rows.back();
    o.require(in_band(last.eoc_h1, 0.8, 1.4));
    o.require(ev.seconds < 300.0);
    o.detail << "eoc_h1 " << show(last.eoc_h1) << ", running max " << show(last.eoc_h1_max) << ", " << ev.seconds
             << " s";
}

void criterion3(Outcome& o) {
    double worst = -1e300;
    for (const StudyEvidence* ev : {&criterion1_study(), &criterion2_study()})
        for (std::size_t i = 0; i < ev->table.rows.size(); ++i)
            worst = std::max(worst, ev->table.rows[i].worst_energy_slack - ev->e0[i] * 1e-8 - 1e-10);
    worst = std::max(worst, rough_laws().worst_energy_excess);
    o.require(worst <= 0.0);
    o.detail << "largest excess over E0 (1 + 1e-8) + 1e-10: " << worst;
}

void criterion4(Outcome& o) {
    double worst = rough_laws().worst_identity;
    for (const StudyEvidence* ev : {&criterion1_study(), &criterion2_study()})
        for (const auto& row : ev->table.rows) worst = std::max(worst, row.worst_constraint_identity);
    o.require(worst <= 1e-9);
    o.detail << "worst nodal identity residual " << worst;
}

void criterion5(Outcome& o) {
    const Mesh mesh = build_unit_mesh(1, 64);
    const auto final_l1 = [&](double tau) {
        FlowConfig c = phase_config(1, 64, 2, 0.25);
        c.tau = tau;
        return run(c, initial_field(c, mesh)).records.back().l1_violation;
    };
    const double ratio = final_l1(1.0 / 64.0) / final_l1(1.0 / 128.0);
    o.require(ratio >= 1.7 && ratio <= 2.3);
    o.detail << "ratio " << ratio;
}

Field random_coefficients(const Mesh& mesh, std::size_t m, SplitMix64& rng) {
    Field f(mesh, m);
    for (auto& c : f.coefficients()) c = rng.uniform(-1.0, 1.0);
    return f;
}

void criterion6(Outcome& o) {
    SplitMix64 rng(6);
    double worst = 0.0;
    for (int d : {1, 2})
        for (int n : {4, 9})
            for (std::size_t m : {2u, 3u}) {
                const Mesh mesh = build_unit_mesh(d, n);
                const Vector beta = lumped_weights(mesh);
                for (int pair = 0; pair < 100; ++pair) {
                    const Field u = random_unit_field(mesh, m, rng.next());
                    const TangentFrame frame(u);
                    const Field v = random_coefficients(mesh, m, rng);
                    const Field w = random_coefficients(mesh, m, rng);
                    const Field pv = project_nodal(u, v);
                    const Field pw = project_nodal(u, w);
                    worst = std::max(worst, std::abs(lumped_inner(beta, pv, w) - lumped_inner(beta, v, pw)));
                    for (std::size_t z = 0; z < mesh.num_vertices(); ++z) {
                        double s = 0.0;
                        for (std::size_t k = 0; k < m; ++k) s += pv.node(z)[k] * u.node(z)[k];
                        worst = std::max(worst, std::abs(s));
                    }
                    Vector alpha(frame.reduced_size());
                    for (auto& a : alpha) a = rng.uniform(-1.0, 1.0);
                    const Field t(mesh, m, frame.expand(alpha));
                    Field r = v;
                    for (std::size_t i = 0; i < r.coefficients().size(); ++i) r.coefficients()[i] -= pv.coefficients()[i];
                    worst = std::max(worst, std::abs(lumped_inner(beta, r, t)));
                }
            }
    o.require(worst <= 1e-12);
    o.detail << "worst residual " << worst;
}

void criterion7(Outcome& o) {
    SplitMix64 rng(7);
    double reproduction = 0.0;
    for (int d = 1; d <= 3; ++d) {
        const Mesh mesh = build_unit_mesh(d, 4);
        const Field v = random_coefficients(mesh, 3, rng);
        const Field r = ritz_project(v);
        for (std::size_t i = 0; i < v.coefficients().size(); ++i)
            reproduction = std::max(reproduction, std::abs(r.coefficients()[i] - v.coefficients()[i]));
    }

    double mean_gap = 0.0;
    const ExactSolution f = exact_phase_solution(2, 1);
    for (int n : {8, 16, 32}) {
        const Mesh mesh = build_unit_mesh(1, n);
        const Vector beta = lumped_weights(mesh);
        const QuadratureRule rule = simplex_quadrature(1, 2);
        for (double t : {0.0, 0.1}) {
            const Field r = ritz_project(f, t, mesh, 2);
            for (std::size_t c = 0; c < 2; ++c) {
                double exact = 0.0, discrete = 0.0;
                for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
                    const double vol = element_geometry(mesh, k).volume;
                    for (std::size_t q = 0; q < rule.size(); ++q)
                        exact += vol * rule.weights[q] * f.value(t, map_to_element(mesh, k, rule.points[q]))[c];
                }
                for (std::size_t z = 0; z < mesh.num_vertices(); ++z) discrete += beta[z] * r.node(z)[c];
                mean_gap = std::max(mean_gap, std::abs(exact - discrete));
            }
        }
    }

    const Mesh coarse = build_unit_mesh(1, 16), fine = build_unit_mesh(1, 32);
    const double ratio = error_norms(ritz_project(f, 0.0, coarse, 2), f, 0.0, 4).h1 /
                         error_norms(ritz_project(f, 0.0, fine, 2), f, 0.0, 4).h1;
    o.require(reproduction <= 1e-10);
    o.require(mean_gap <= 1e-11);
    o.require(ratio >= 1.8 && ratio <= 2.2);
    o.detail << "reproduction " << reproduction << ", mean " << mean_gap << ", H1 ratio " << ratio;
}

void criterion8(Outcome& o) {
    const ExactSolution f = exact_phase_solution(2, 1);
    const double T = 0.25;
    std::vector<double> defects;
    for (int n : {16, 32, 64}) {
        const double tau = 1.0 / n;
        defects.push_back(defect_norm(f, build_unit_mesh(1, n), tau, step_count(T, tau), 2));
    }
    o.detail << "ratios";
    for (std::size_t i = 1; i < defects.size(); ++i) {
        const double ratio = defects[i - 1] / defects[i];
        o.require(ratio >= 1.6 && ratio <= 2.4);
        o.detail << ' ' << ratio;
    }
}

void criterion9(Outcome& o) {
    SplitMix64 rng(9);
    double worst = 0.0;
    std::size_t meshes = 0;
    for (int d = 1; d <= 3; ++d)
        for (int n = 1;; ++n) {
            const Mesh mesh = build_unit_mesh(d, n);
            if (mesh.num_vertices() > 50) break;
            ++meshes;
            const FlowOperators ops = FlowOperators::assemble(mesh);
            for (std::size_t m : {2u, 3u})
                for (int state = 0; state < 5; ++state) {
                    Field u = random_unit_field(mesh, m, rng.next());
                    for (std::size_t z = 0; z < mesh.num_vertices(); ++z) {
                        const double r = rng.uniform(0.8, 1.25);
                        for (auto& x : u.node(z)) x *= r;
                    }
                    const double tau = std::pow(10.0, rng.uniform(-3.0, 0.0));
                    const FlowState s{u, 0, tau, 0.0};
                    const StepResult a = step(s, ops);
                    const OracleStep b = saddle_point_step_oracle(s, ops);
                    for (std::size_t i = 0; i < u.coefficients().size(); ++i)
                        worst = std::max(worst, std::abs(a.state.u.coefficients()[i] - b.state.u.coefficients()[i]));
                }
        }
    o.require(worst <= 1e-9);
    o.detail << meshes << " meshes, worst difference " << worst;
}

void criterion10(Outcome& o) {
    SplitMix64 rng(10);
    double worst_ratio = 0.0;
    for (int pair = 0; pair < 1000; ++pair) {
        const std::size_t m = 2 + static_cast<std::size_t>(pair % 3);
        Vector u(m), v(m);
        const auto draw = [&](Vector& x, double modulus) {
            double s = 0.0;
            for (auto& c : x) {
                c = rng.normal();
                s += c * c;
            }
            for (auto& c : x) c *= modulus / std::sqrt(s);
        };
        draw(u, rng.uniform(0.5, 2.0));
        if (pair % 2 == 0) {
            draw(v, rng.uniform(0.5, 2.0));
        } else {
            // Nearby partner with the modulus kept inside [1/2, 2].
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                v[k] = u[k] + rng.uniform(-0.05, 0.05);
                s += v[k] * v[k];
            }
            const double r = std::clamp(std::sqrt(s), 0.5, 2.0);
            for (auto& c : v) c *= r / std::sqrt(s);
        }
        double nu = 0.0, nv = 0.0, diff = 0.0, ndiff = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            nu += u[k] * u[k];
            nv += v[k] * v[k];
        }
        nu = std::sqrt(nu);
        nv = std::sqrt(nv);
        for (std::size_t k = 0; k < m; ++k) {
            diff += (u[k] - v[k]) * (u[k] - v[k]);
            ndiff += (u[k] / nu - v[k] / nv) * (u[k] / nu - v[k] / nv);
        }
        if (diff > 0.0) worst_ratio = std::max(worst_ratio, std::sqrt(ndiff / diff));
    }
    o.require(worst_ratio <= 4.0);
    o.detail << "largest |N(u) - N(v)| / |u - v| = " << worst_ratio;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
        {"1 convergence rate d=1", criterion1},
        {"2 convergence rate d=2", criterion2},
        {"3 discrete energy law", criterion3},
        {"4 nodal constraint identity", criterion4},
        {"5 violation scales with tau", criterion5},
        {"6 projection algebra", criterion6},
        {"7 Ritz projection", criterion7},
        {"8 consistency defect", criterion8},
        {"9 oracle equivalence", criterion9},
        {"10 normalization Lipschitz bound", criterion10},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            check(o);
        } catch (const std::exception& e) {
            o.passed = false;
            o.detail << "exception: " << e.what();
        }
        std::printf("%s criterion %s: %s\n", o.passed ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str());
        std::fflush(stdout);
        if (!o.passed) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
