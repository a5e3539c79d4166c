#pragma once

/// @file quadrature.hpp
/// @brief Symmetric simplex quadrature in barycentric coordinates.

#include <array>
#include <vector>

namespace sphereflow {

/// Points in barycentric coordinates (d+1 used slots); weights are fractions of
/// the element volume and sum to one.
struct QuadratureRule {
    int dim = 0;
    int degree = 0;
    std::vector<std::array<double, 4>> points;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
};

/// Rule exact for polynomials of total degree `order` on a d-simplex.
/// order <= 2 gives the classic (d+1)-point rule; higher orders use the
/// Grundmann-Moeller family of degree 2s+1.
QuadratureRule simplex_quadrature(int dim, int order);

}  // namespace sphereflow
