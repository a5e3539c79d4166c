#include "sphereflow/quadrature.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace sphereflow {

namespace {

QuadratureRule vertex_symmetric_rule(int dim) {
    // d+1 equal weights at the permutations of (b, a, ..., a).
    QuadratureRule rule;
    rule.dim = dim;
    rule.degree = 2;
    double a = 0.0, b = 0.0;
    switch (dim) {
        case 1:
            a = 0.5 - 0.5 / std::sqrt(3.0);
            b = 0.5 + 0.5 / std::sqrt(3.0);
            rule.degree = 3;
            break;
        case 2:
            a = 1.0 / 6.0;
            b = 2.0 / 3.0;
            break;
        default:
            a = (5.0 - std::sqrt(5.0)) / 20.0;
            b = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
            break;
    }
    for (int i = 0; i <= dim; ++i) {
        std::array<double, 4> p{};
        for (int j = 0; j <= dim; ++j) p[static_cast<std::size_t>(j)] = (i == j) ? b : a;
        rule.points.push_back(p);
        rule.weights.push_back(1.0 / (dim + 1));
    }
    return rule;
}

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Grundmann & Moeller, SIAM J. Numer. Anal. 15 (1978): degree 2s+1 on the
// n-simplex, weights relative to the simplex volume.
QuadratureRule grundmann_moeller(int dim, int s) {
    QuadratureRule rule;
    rule.dim = dim;
    rule.degree = 2 * s + 1;
    const int d = 2 * s + 1;
    for (int i = 0; i <= s; ++i) {
        const double denom = d + dim - 2 * i;
        const double w = std::pow(-1.0, i) * std::pow(2.0, -2 * s) * std::pow(denom, d) *
                         factorial(dim) / (factorial(i) * factorial(d + dim - i));
        // Enumerate multi-indices beta in N^{dim+1} with |beta| = s - i.
        std::array<int, 4> beta{};
        const int total = s - i;
        std::function<void(int, int)> recurse = [&](int slot, int remaining) {
            if (slot == dim) {
                beta[static_cast<std::size_t>(slot)] = remaining;
                std::array<double, 4> p{};
                for (int j = 0; j <= dim; ++j)
                    p[static_cast<std::size_t>(j)] = (2.0 * beta[static_cast<std::size_t>(j)] + 1.0) / denom;
                rule.points.push_back(p);
                rule.weights.push_back(w);
                return;
            }
            for (int v = 0; v <= remaining; ++v) {
                beta[static_cast<std::size_t>(slot)] = v;
                recurse(slot + 1, remaining - v);
            }
        };
        recurse(0, total);
    }
    return rule;
}

}  // namespace

QuadratureRule simplex_quadrature(int dim, int order) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("simplex_quadrature: dimension must be 1, 2 or 3");
    if (order < 1) throw std::invalid_argument("simplex_quadrature: order must be positive");
    if (order <= 2) return vertex_symmetric_rule(dim);
    const int s = order / 2;  // smallest s with 2s+1 >= order
    return grundmann_moeller(dim, s);
}

}  // namespace sphereflow
