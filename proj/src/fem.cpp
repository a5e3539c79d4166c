#include "sphereflow/fem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sphereflow/quadrature.hpp"

namespace sphereflow {

Field::Field(const Mesh& mesh, std::size_t m)
    : mesh_(&mesh), m_(m), coeffs_(mesh.num_vertices() * m, 0.0) {}

Field::Field(const Mesh& mesh, std::size_t m, Vector coefficients)
    : mesh_(&mesh), m_(m), coeffs_(std::move(coefficients)) {
    if (coeffs_.size() != mesh.num_vertices() * m) {
        throw std::invalid_argument("Field: coefficient count does not match nodes * m");
    }
}

void Field::require_compatible(const Field& other, const char* what) const {
    if (mesh_ != other.mesh_ || m_ != other.m_) {
        throw std::invalid_argument(std::string(what) + ": fields differ in mesh or target dimension");
    }
}

namespace {

template <class LocalMatrix>
SparseMatrix assemble(const Mesh& mesh, LocalMatrix&& local) {
    const std::size_t nv = mesh.vertices_per_element();
    std::vector<Triplet> triplets;
    triplets.reserve(mesh.num_elements() * nv * nv);
    for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
        const auto geo = element_geometry(mesh, k);
        const auto el = mesh.element(k);
        for (std::size_t a = 0; a < nv; ++a)
            for (std::size_t b = 0; b < nv; ++b)
                triplets.push_back({el[a], el[b], local(geo, a, b)});
    }
    return csr_from_triplets(triplets, mesh.num_vertices(), mesh.num_vertices());
}

}  // namespace

SparseMatrix assemble_stiffness(const Mesh& mesh) {
    const int d = mesh.dim();
    return assemble(mesh, [d](const ElementGeometry& geo, std::size_t a, std::size_t b) {
        double g = 0.0;
        for (int x = 0; x < d; ++x) {
            const auto xi = static_cast<std::size_t>(x);
            g += geo.grad_lambda[a][xi] * geo.grad_lambda[b][xi];
        }
        return geo.volume * g;
    });
}

SparseMatrix assemble_mass(const Mesh& mesh) {
    const double d = mesh.dim();
    const double denom = (d + 1.0) * (d + 2.0);
    return assemble(mesh, [denom](const ElementGeometry& geo, std::size_t a, std::size_t b) {
        return geo.volume * (a == b ? 2.0 : 1.0) / denom;
    });
}

Vector lumped_weights(const Mesh& mesh) {
    Vector beta(mesh.num_vertices(), 0.0);
    const double share = 1.0 / static_cast<double>(mesh.vertices_per_element());
    for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
        const double vol = element_geometry(mesh, k).volume;
        for (std::size_t z : mesh.element(k)) beta[z] += share * vol;
    }
    return beta;
}

double lumped_inner(std::span<const double> beta, const Field& v, const Field& w) {
    v.require_compatible(w, "lumped_inner");
    if (beta.size() != v.num_nodes()) {
        throw std::invalid_argument("lumped_inner: weight count does not match nodes");
    }
    double s = 0.0;
    for (std::size_t z = 0; z < v.num_nodes(); ++z) s += beta[z] * dot(v.node(z), w.node(z));
    return s;
}

Field interpolate_nodal(const std::function<Vector(const Point&)>& f, const Mesh& mesh,
                        std::size_t m) {
    Field u(mesh, m);
    for (std::size_t z = 0; z < mesh.num_vertices(); ++z) {
        const Vector val = f(mesh.vertex(z));
        if (val.size() != m) throw std::invalid_argument("interpolate_nodal: wrong value size");
        for (std::size_t c = 0; c < m; ++c) {
            if (!std::isfinite(val[c])) {
                std::ostringstream os;
                os << "interpolate_nodal: non-finite sample at node " << z;
                throw std::domain_error(os.str());
            }
            u.node(z)[c] = val[c];
        }
    }
    return u;
}

Field interpolate_nodal(const ExactSolution& f, const Mesh& mesh, double t) {
    return interpolate_nodal([&](const Point& x) { return f.value(t, x); }, mesh, f.m);
}

Vector evaluate(const Field& u, std::size_t k, std::span<const double> barycentric) {
    const auto el = u.mesh().element(k);
    Vector val(u.m(), 0.0);
    for (std::size_t a = 0; a < el.size(); ++a) {
        const auto node = u.node(el[a]);
        for (std::size_t c = 0; c < u.m(); ++c) val[c] += barycentric[a] * node[c];
    }
    return val;
}

namespace {

// R_h is linear and reproduces constants, so R_h f = mean(f) + R_h(f - mean(f)).
// Only the gradient load goes through CG; a constant-dominated right-hand side
// would otherwise sit on the roundoff floor of the relative residual.
Field solve_ritz_system(const Mesh& mesh, std::size_t m, const Vector& grad_load, const Vector& mean,
                        double solver_tol) {
    const SparseMatrix a = assemble_stiffness(mesh);
    const Vector beta = lumped_weights(mesh);
    const std::size_t n = mesh.num_vertices();
    const LinearOperator apply = [&](std::span<const double> x, std::span<double> y) {
        a.multiply(x, y);
        const double bx = dot(beta, x);
        for (std::size_t i = 0; i < n; ++i) y[i] += beta[i] * bx;
    };
    Field out(mesh, m);
    Vector b(n);
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t i = 0; i < n; ++i) b[i] = grad_load[i * m + c];
        const CgResult sol = cg_solve(apply, b, solver_tol);
        for (std::size_t i = 0; i < n; ++i) out.node(i)[c] = sol.x[i] + mean[c];
    }
    return out;
}

}  // namespace

Field ritz_project(const ExactSolution& f, double t, const Mesh& mesh, int quadrature_order,
                   double solver_tol) {
    if (quadrature_order < 2) throw std::invalid_argument("ritz_project: quadrature order must be at least 2");
    const std::size_t m = f.m;
    const int d = mesh.dim();
    const QuadratureRule rule = simplex_quadrature(d, quadrature_order);

    Vector rhs(mesh.num_vertices() * m, 0.0);
    Vector mean(m, 0.0);
    for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
        const auto geo = element_geometry(mesh, k);
        const auto el = mesh.element(k);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Point x = map_to_element(mesh, k, rule.points[q]);
            const double w = rule.weights[q] * geo.volume;
            const Vector val = f.value(t, x);
            const Vector grad = f.gradient(t, x);
            for (std::size_t c = 0; c < m; ++c) mean[c] += w * val[c];
            for (std::size_t a = 0; a < el.size(); ++a) {
                for (std::size_t c = 0; c < m; ++c) {
                    double g = 0.0;
                    for (int j = 0; j < d; ++j) {
                        const auto ji = static_cast<std::size_t>(j);
                        g += grad[c * static_cast<std::size_t>(d) + ji] * geo.grad_lambda[a][ji];
                    }
                    rhs[el[a] * m + c] += w * g;
                }
            }
        }
    }
    return solve_ritz_system(mesh, m, rhs, mean, solver_tol);
}

Field ritz_project(const Field& v, double solver_tol) {
    const Mesh& mesh = v.mesh();
    const std::size_t m = v.m();
    const SparseMatrix a = assemble_stiffness(mesh);
    const Vector beta = lumped_weights(mesh);
    const Vector rhs = spmv_block(a, v.coefficients(), m);
    Vector mean(m, 0.0);
    for (std::size_t z = 0; z < v.num_nodes(); ++z)
        for (std::size_t c = 0; c < m; ++c) mean[c] += beta[z] * v.node(z)[c];
    return solve_ritz_system(mesh, m, rhs, mean, solver_tol);
}

double energy(const SparseMatrix& stiffness, const Field& u) {
    const Vector au = spmv_block(stiffness, u.coefficients(), u.m());
    return 0.5 * dot(u.coefficients(), au);
}

double mass_norm_squared(const SparseMatrix& mass, const Field& v) {
    const Vector mv = spmv_block(mass, v.coefficients(), v.m());
    return dot(v.coefficients(), mv);
}

ErrorNorms error_norms(const Field& u_h, const ExactSolution& f, double t, int quadrature_order) {
    if (quadrature_order < 2) throw std::invalid_argument("error_norms: quadrature order must be at least 2");
    if (u_h.m() != f.m) throw std::invalid_argument("error_norms: target dimensions differ");
    const Mesh& mesh = u_h.mesh();
    const std::size_t m = u_h.m();
    const auto d = static_cast<std::size_t>(mesh.dim());
    const QuadratureRule rule = simplex_quadrature(mesh.dim(), quadrature_order);

    double l2 = 0.0, semi = 0.0;
    Vector grad_h(m * d);
    for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
        const auto geo = element_geometry(mesh, k);
        const auto el = mesh.element(k);
        std::fill(grad_h.begin(), grad_h.end(), 0.0);
        for (std::size_t a = 0; a < el.size(); ++a) {
            const auto node = u_h.node(el[a]);
            for (std::size_t c = 0; c < m; ++c)
                for (std::size_t j = 0; j < d; ++j) grad_h[c * d + j] += node[c] * geo.grad_lambda[a][j];
        }
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Point x = map_to_element(mesh, k, rule.points[q]);
            const double w = rule.weights[q] * geo.volume;
            const Vector uh = evaluate(u_h, k, rule.points[q]);
            const Vector val = f.value(t, x);
            const Vector grad = f.gradient(t, x);
            for (std::size_t c = 0; c < m; ++c) l2 += w * (uh[c] - val[c]) * (uh[c] - val[c]);
            for (std::size_t i = 0; i < m * d; ++i) semi += w * (grad_h[i] - grad[i]) * (grad_h[i] - grad[i]);
        }
    }
    ErrorNorms e;
    e.l2 = std::sqrt(l2);
    e.h1_semi = std::sqrt(semi);
    e.h1 = std::sqrt(l2 + semi);
    return e;
}

}  // namespace sphereflow
