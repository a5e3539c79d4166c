#pragma once

/// @file fem.hpp
/// @brief P1 Lagrange machinery for vector-valued fields on simplicial meshes.
///
/// Scalar mass and stiffness matrices are assembled once and applied to each of
/// the m components of a Field; the block structure is never stored.

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "sphereflow/linalg.hpp"
#include "sphereflow/mesh.hpp"

namespace sphereflow {

/// Continuous piecewise linear map into R^m, one m-vector per mesh vertex,
/// stored node-major. The mesh must outlive the field.
class Field {
public:
    Field(const Mesh& mesh, std::size_t m);
    Field(const Mesh& mesh, std::size_t m, Vector coefficients);

    const Mesh& mesh() const { return *mesh_; }
    std::size_t m() const { return m_; }
    std::size_t num_nodes() const { return mesh_->num_vertices(); }

    std::span<double> node(std::size_t z) { return {coeffs_.data() + z * m_, m_}; }
    std::span<const double> node(std::size_t z) const { return {coeffs_.data() + z * m_, m_}; }

    Vector& coefficients() { return coeffs_; }
    const Vector& coefficients() const { return coeffs_; }

    /// Throws std::invalid_argument unless both fields live on the same mesh with equal m.
    void require_compatible(const Field& other, const char* what) const;

private:
    const Mesh* mesh_;
    std::size_t m_;
    Vector coeffs_;
};

/// Closed-form reference map with its spatial gradient (m x d, row-major) and
/// time derivative.
struct ExactSolution {
    std::size_t m = 0;
    int dim = 0;
    std::function<Vector(double, const Point&)> value;
    std::function<Vector(double, const Point&)> gradient;
    std::function<Vector(double, const Point&)> time_derivative;
    std::string description;
};

/// A_ij = (grad phi_i, grad phi_j).
SparseMatrix assemble_stiffness(const Mesh& mesh);

/// M_ij = (phi_i, phi_j), exact simplex formula.
SparseMatrix assemble_mass(const Mesh& mesh);

/// beta_z = (1, phi_z).
Vector lumped_weights(const Mesh& mesh);

/// (v, w)_h = sum_z beta_z v(z) . w(z).
double lumped_inner(std::span<const double> beta, const Field& v, const Field& w);

Field interpolate_nodal(const ExactSolution& f, const Mesh& mesh, double t);
Field interpolate_nodal(const std::function<Vector(const Point&)>& f, const Mesh& mesh,
                        std::size_t m);

/// Value of a P1 field at barycentric coordinates of element k.
Vector evaluate(const Field& u, std::size_t k, std::span<const double> barycentric);

/// Mean-preserving Ritz projection of f(t, .): solves (A + beta beta^T) x_c = rhs_c
/// per component with CG, right-hand side by simplex quadrature.
Field ritz_project(const ExactSolution& f, double t, const Mesh& mesh, int quadrature_order,
                   double solver_tol = 1e-12);

/// Ritz projection of a field already in V_h.
Field ritz_project(const Field& v, double solver_tol = 1e-12);

/// Dirichlet energy 1/2 sum_c u_c^T A u_c.
double energy(const SparseMatrix& stiffness, const Field& u);

/// Squared consistent-mass norm v^T (M (x) I) v.
double mass_norm_squared(const SparseMatrix& mass, const Field& v);

struct ErrorNorms {
    double l2 = 0.0;
    double h1_semi = 0.0;
    double h1 = 0.0;
};

/// Quadrature errors ||u_h - f(t)|| in L2, H1-seminorm and H1.
ErrorNorms error_norms(const Field& u_h, const ExactSolution& f, double t, int quadrature_order);

}  // namespace sphereflow
