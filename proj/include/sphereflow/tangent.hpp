#pragma once

/// @file tangent.hpp
/// @brief Nodal normalization, tangent frames and the discrete projection P_h.
///
/// The discrete tangent space of a nodal unit field u_hat is the set of P1
/// fields v with v(z) . u_hat(z) = 0 at every vertex z. All operators here are
/// nodewise maps.

#include <cstddef>
#include <span>
#include <stdexcept>

#include "sphereflow/fem.hpp"

namespace sphereflow {

inline constexpr double default_normalization_floor = 0.1;

class NormalizationError : public std::runtime_error {
public:
    NormalizationError(std::size_t node, double modulus, double floor);
    std::size_t node() const { return node_; }
    double modulus() const { return modulus_; }

private:
    std::size_t node_;
    double modulus_;
};

/// u(z) / |u(z)| at every node; throws NormalizationError when a nodal modulus
/// falls below `floor`.
Field normalize_nodal(const Field& u, double floor = default_normalization_floor);

/// Smallest nodal modulus of u.
double min_nodal_modulus(const Field& u);

enum class FrameOrientation {
    standard,
    /// Every column negated; spans the same subspace.
    flipped,
};

/// Per-node orthonormal basis of u_hat(z)^perp, m-1 columns per node.
class TangentFrame {
public:
    TangentFrame(const Field& u_hat, FrameOrientation orientation = FrameOrientation::standard);

    const Mesh& mesh() const { return *mesh_; }
    std::size_t m() const { return m_; }
    std::size_t num_nodes() const { return mesh_->num_vertices(); }
    std::size_t columns_per_node() const { return m_ - 1; }
    /// Length of the reduced coordinate vector, (m-1) * nodes.
    std::size_t reduced_size() const { return columns_per_node() * num_nodes(); }

    /// Column k at node z as an m-vector.
    std::span<const double> column(std::size_t z, std::size_t k) const {
        return {columns_.data() + (z * (m_ - 1) + k) * m_, m_};
    }

    /// v = F alpha, node-major block vector of length m * nodes.
    void expand(std::span<const double> alpha, std::span<double> v) const;
    Vector expand(std::span<const double> alpha) const;

    /// alpha = F^T v.
    void reduce(std::span<const double> v, std::span<double> alpha) const;
    Vector reduce(std::span<const double> v) const;

private:
    const Mesh* mesh_;
    std::size_t m_;
    Vector columns_;
};

/// Frame built from the least aligned standard basis vectors by Gram-Schmidt.
TangentFrame tangent_frame(const Field& u_hat,
                           FrameOrientation orientation = FrameOrientation::standard);

/// P_h(u_hat) v: (I - u_hat(z) u_hat(z)^T) v(z) at every node.
Field project_nodal(const Field& u_hat, const Field& v);

/// True iff max_z |v(z) . u_hat(z)| <= tol.
bool in_tangent_space(const Field& u_hat, const Field& v, double tol);

}  // namespace sphereflow
