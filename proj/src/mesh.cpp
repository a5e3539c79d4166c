#include "sphereflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sphereflow {

namespace {

double distance(const Point& a, const Point& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Edge vectors v_i - v_0 as the columns of a d x d Jacobian.
std::array<std::array<double, 3>, 3> jacobian(const Mesh& mesh, std::size_t k) {
    const auto el = mesh.element(k);
    const Point& v0 = mesh.vertex(el[0]);
    std::array<std::array<double, 3>, 3> j{};
    for (int c = 0; c < mesh.dim(); ++c) {
        const Point& vc = mesh.vertex(el[static_cast<std::size_t>(c) + 1]);
        for (int r = 0; r < mesh.dim(); ++r) j[r][c] = vc[r] - v0[r];
    }
    return j;
}

double determinant(const std::array<std::array<double, 3>, 3>& j, int dim) {
    switch (dim) {
        case 1: return j[0][0];
        case 2: return j[0][0] * j[1][1] - j[0][1] * j[1][0];
        default:
            return j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
                   j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
                   j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    }
}

double factorial(int d) {
    double f = 1.0;
    for (int i = 2; i <= d; ++i) f *= i;
    return f;
}

}  // namespace

Mesh::Mesh(int dim, std::vector<Point> vertices, std::vector<std::size_t> connectivity)
    : dim_(dim), vertices_(std::move(vertices)), connectivity_(std::move(connectivity)) {
    if (dim_ < 1 || dim_ > 3) throw std::invalid_argument("Mesh: dimension must be 1, 2 or 3");
    if (connectivity_.size() % vertices_per_element() != 0) {
        throw std::invalid_argument("Mesh: connectivity length not a multiple of d+1");
    }
    for (std::size_t v : connectivity_) {
        if (v >= vertices_.size()) throw std::invalid_argument("Mesh: vertex index out of range");
    }
    // Normalize orientation so every signed volume is positive.
    for (std::size_t k = 0; k < num_elements(); ++k) {
        if (signed_volume(*this, k) < 0.0) {
            std::swap(connectivity_[k * vertices_per_element()],
                      connectivity_[k * vertices_per_element() + 1]);
        }
    }
    h_ = mesh_size(*this);
}

Mesh build_unit_mesh(int dim, int n) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("build_unit_mesh: dimension must be 1, 2 or 3");
    if (n < 1) throw std::invalid_argument("build_unit_mesh: subdivisions must be at least 1");

    const std::size_t np = static_cast<std::size_t>(n) + 1;
    const std::size_t ny = dim >= 2 ? np : 1;
    const std::size_t nz = dim >= 3 ? np : 1;
    std::vector<Point> vertices;
    vertices.reserve(np * ny * nz);
    for (std::size_t k = 0; k < nz; ++k)
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < np; ++i)
                vertices.push_back({static_cast<double>(i) / n, dim >= 2 ? static_cast<double>(j) / n : 0.0,
                                    dim >= 3 ? static_cast<double>(k) / n : 0.0});

    const std::array<std::size_t, 3> stride{1, np, np * np};
    std::array<int, 3> perm{0, 1, 2};
    std::vector<std::array<int, 3>> permutations;
    do {
        permutations.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.begin() + dim));

    const std::size_t cells_y = dim >= 2 ? static_cast<std::size_t>(n) : 1;
    const std::size_t cells_z = dim >= 3 ? static_cast<std::size_t>(n) : 1;
    std::vector<std::size_t> connectivity;
    for (std::size_t ck = 0; ck < cells_z; ++ck)
        for (std::size_t cj = 0; cj < cells_y; ++cj)
            for (std::size_t ci = 0; ci < static_cast<std::size_t>(n); ++ci) {
                const std::size_t corner = ci + cj * stride[1] + ck * stride[2];
                // Kuhn simplex: walk from the lower corner along the axes in the order of p.
                for (const auto& p : permutations) {
                    std::size_t v = corner;
                    connectivity.push_back(v);
                    for (int a = 0; a < dim; ++a) {
                        v += stride[static_cast<std::size_t>(p[a])];
                        connectivity.push_back(v);
                    }
                }
            }
    return Mesh(dim, std::move(vertices), std::move(connectivity));
}

double mesh_size(const Mesh& mesh) {
    double h = 0.0;
    for (std::size_t k = 0; k < mesh.num_elements(); ++k) {
        const auto el = mesh.element(k);
        for (std::size_t a = 0; a < el.size(); ++a)
            for (std::size_t b = a + 1; b < el.size(); ++b)
                h = std::max(h, distance(mesh.vertex(el[a]), mesh.vertex(el[b])));
    }
    return h;
}

double signed_volume(const Mesh& mesh, std::size_t k) {
    return determinant(jacobian(mesh, k), mesh.dim()) / factorial(mesh.dim());
}

ElementGeometry element_geometry(const Mesh& mesh, std::size_t k) {
    const int d = mesh.dim();
    const auto j = jacobian(mesh, k);
    const double det = determinant(j, d);
    ElementGeometry geo;
    geo.volume = std::abs(det) / factorial(d);
    if (geo.volume < 1e-14) {
        std::ostringstream os;
        os << "element " << k << " is degenerate (volume " << geo.volume << ")";
        throw std::runtime_error(os.str());
    }
    // Rows of J^{-1} are the gradients of lambda_1..lambda_d.
    std::array<std::array<double, 3>, 3> inv{};
    switch (d) {
        case 1:
            inv[0][0] = 1.0 / det;
            break;
        case 2:
            inv[0][0] = j[1][1] / det;
            inv[0][1] = -j[0][1] / det;
            inv[1][0] = -j[1][0] / det;
            inv[1][1] = j[0][0] / det;
            break;
        default:
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) {
                    // inverse = adj(J)^T / det, adj entries from cyclic cofactors
                    const int r1 = (c + 1) % 3, r2 = (c + 2) % 3;
                    const int c1 = (r + 1) % 3, c2 = (r + 2) % 3;
                    inv[r][c] = (j[r1][c1] * j[r2][c2] - j[r1][c2] * j[r2][c1]) / det;
                }
            break;
    }
    Point sum{};
    for (int a = 1; a <= d; ++a) {
        for (int x = 0; x < d; ++x) {
            geo.grad_lambda[static_cast<std::size_t>(a)][static_cast<std::size_t>(x)] = inv[a - 1][x];
            sum[static_cast<std::size_t>(x)] += inv[a - 1][x];
        }
    }
    for (int x = 0; x < d; ++x) geo.grad_lambda[0][static_cast<std::size_t>(x)] = -sum[static_cast<std::size_t>(x)];
    return geo;
}

Point map_to_element(const Mesh& mesh, std::size_t k, std::span<const double> barycentric) {
    const auto el = mesh.element(k);
    Point x{};
    for (std::size_t a = 0; a < el.size(); ++a) {
        const Point& v = mesh.vertex(el[a]);
        for (std::size_t c = 0; c < 3; ++c) x[c] += barycentric[a] * v[c];
    }
    return x;
}

}  // namespace sphereflow
