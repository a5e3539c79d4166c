#pragma once

/// @file mesh.hpp
/// @brief Structured simplicial triangulations of the unit box (0,1)^d.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace sphereflow {

/// Point in R^d stored with three slots; coordinates beyond dim are zero.
using Point = std::array<double, 3>;

/// Immutable simplicial mesh. Elements are (d+1)-tuples of vertex indices with
/// positive orientation.
class Mesh {
public:
    Mesh(int dim, std::vector<Point> vertices, std::vector<std::size_t> connectivity);

    int dim() const { return dim_; }
    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_elements() const { return connectivity_.size() / vertices_per_element(); }
    std::size_t vertices_per_element() const { return static_cast<std::size_t>(dim_) + 1; }

    const Point& vertex(std::size_t i) const { return vertices_[i]; }
    const std::vector<Point>& vertices() const { return vertices_; }

    std::span<const std::size_t> element(std::size_t k) const {
        return {connectivity_.data() + k * vertices_per_element(), vertices_per_element()};
    }

    /// Maximum element diameter.
    double h() const { return h_; }

private:
    int dim_;
    std::vector<Point> vertices_;
    std::vector<std::size_t> connectivity_;
    double h_ = 0.0;
};

/// Unit box split into n^d cubes, each cut into d! Kuhn simplices. Vertices are
/// numbered lexicographically with x_1 fastest; elements cell by cell.
Mesh build_unit_mesh(int dim, int n);

/// Largest pairwise vertex distance over all elements.
double mesh_size(const Mesh& mesh);

/// Affine data of one simplex: volume and constant barycentric gradients.
struct ElementGeometry {
    double volume = 0.0;
    std::array<Point, 4> grad_lambda{};
};

/// Throws std::runtime_error for elements with volume below 1e-14.
ElementGeometry element_geometry(const Mesh& mesh, std::size_t k);

/// Signed volume with the stored vertex order.
double signed_volume(const Mesh& mesh, std::size_t k);

/// Physical point of barycentric coordinates on element k.
Point map_to_element(const Mesh& mesh, std::size_t k, std::span<const double> barycentric);

}  // namespace sphereflow
