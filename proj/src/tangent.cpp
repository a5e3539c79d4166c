#include "sphereflow/tangent.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sphereflow {

namespace {

std::string normalization_message(std::size_t node, double modulus, double floor) {
    std::ostringstream os;
    os << "normalization failed: node " << node << " has modulus " << modulus
       << " below floor " << floor;
    return os.str();
}

}  // namespace

NormalizationError::NormalizationError(std::size_t node, double modulus, double floor)
    : std::runtime_error(normalization_message(node, modulus, floor)), node_(node), modulus_(modulus) {}

Field normalize_nodal(const Field& u, double floor) {
    Field out = u;
    for (std::size_t z = 0; z < u.num_nodes(); ++z) {
        const double r = norm2(u.node(z));
        if (!(r >= floor)) throw NormalizationError(z, r, floor);
        for (double& c : out.node(z)) c /= r;
    }
    return out;
}

double min_nodal_modulus(const Field& u) {
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t z = 0; z < u.num_nodes(); ++z) r = std::min(r, norm2(u.node(z)));
    return r;
}

TangentFrame::TangentFrame(const Field& u_hat, FrameOrientation orientation)
    : mesh_(&u_hat.mesh()), m_(u_hat.m()) {
    if (m_ < 2) throw std::invalid_argument("TangentFrame: target dimension must be at least 2");
    const std::size_t cols = m_ - 1;
    columns_.assign(num_nodes() * cols * m_, 0.0);
    const double sign = orientation == FrameOrientation::flipped ? -1.0 : 1.0;

    std::vector<std::size_t> order(m_);
    Vector cand(m_);
    for (std::size_t z = 0; z < num_nodes(); ++z) {
        const auto u = u_hat.node(z);
        if (std::abs(norm2(u) - 1.0) > 1e-10) {
            std::ostringstream os;
            os << "TangentFrame: node " << z << " direction is not a unit vector";
            throw std::invalid_argument(os.str());
        }
        // Candidates e_k ordered by |u_k| ascending, lowest index first on ties.
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return std::abs(u[a]) < std::abs(u[b]); });

        std::size_t accepted = 0;
        for (std::size_t idx = 0; idx < m_ && accepted < cols; ++idx) {
            std::fill(cand.begin(), cand.end(), 0.0);
            cand[order[idx]] = 1.0;
            double residual = 0.0;
            // Two Gram-Schmidt passes against u_hat(z) and the accepted columns.
            for (int pass = 0; pass < 2; ++pass) {
                const double pu = dot(cand, u);
                for (std::size_t c = 0; c < m_; ++c) cand[c] -= pu * u[c];
                for (std::size_t k = 0; k < accepted; ++k) {
                    const auto col = column(z, k);
                    const double pk = dot(cand, col);
                    for (std::size_t c = 0; c < m_; ++c) cand[c] -= pk * col[c];
                }
                if (pass == 0) residual = norm2(cand);
                if (residual < 1e-8) break;
            }
            if (residual < 1e-8) continue;
            const double len = norm2(cand);
            double* dst = columns_.data() + (z * cols + accepted) * m_;
            for (std::size_t c = 0; c < m_; ++c) dst[c] = cand[c] / len;
            ++accepted;
        }
        if (accepted != cols) {
            std::ostringstream os;
            os << "TangentFrame: could not complete frame at node " << z;
            throw std::runtime_error(os.str());
        }
        if (sign < 0.0) {
            double* first = columns_.data() + z * cols * m_;
            for (std::size_t i = 0; i < cols * m_; ++i) first[i] = -first[i];
        }
    }
}

void TangentFrame::expand(std::span<const double> alpha, std::span<double> v) const {
    const std::size_t cols = m_ - 1;
    if (alpha.size() != reduced_size() || v.size() != num_nodes() * m_) {
        throw std::invalid_argument("TangentFrame::expand: dimension mismatch");
    }
    for (std::size_t z = 0; z < num_nodes(); ++z) {
        double* vz = v.data() + z * m_;
        std::fill(vz, vz + m_, 0.0);
        for (std::size_t k = 0; k < cols; ++k) {
            const double a = alpha[z * cols + k];
            const auto col = column(z, k);
            for (std::size_t c = 0; c < m_; ++c) vz[c] += a * col[c];
        }
    }
}

Vector TangentFrame::expand(std::span<const double> alpha) const {
    Vector v(num_nodes() * m_);
    expand(alpha, v);
    return v;
}

void TangentFrame::reduce(std::span<const double> v, std::span<double> alpha) const {
    const std::size_t cols = m_ - 1;
    if (alpha.size() != reduced_size() || v.size() != num_nodes() * m_) {
        throw std::invalid_argument("TangentFrame::reduce: dimension mismatch");
    }
    for (std::size_t z = 0; z < num_nodes(); ++z) {
        const auto vz = v.subspan(z * m_, m_);
        for (std::size_t k = 0; k < cols; ++k) alpha[z * cols + k] = dot(column(z, k), vz);
    }
}

Vector TangentFrame::reduce(std::span<const double> v) const {
    Vector alpha(reduced_size());
    reduce(v, alpha);
    return alpha;
}

TangentFrame tangent_frame(const Field& u_hat, FrameOrientation orientation) {
    return TangentFrame(u_hat, orientation);
}

Field project_nodal(const Field& u_hat, const Field& v) {
    u_hat.require_compatible(v, "project_nodal");
    Field out = v;
    for (std::size_t z = 0; z < v.num_nodes(); ++z) {
        const auto u = u_hat.node(z);
        auto w = out.node(z);
        const double p = dot(u, v.node(z));
        for (std::size_t c = 0; c < v.m(); ++c) w[c] -= p * u[c];
    }
    return out;
}

bool in_tangent_space(const Field& u_hat, const Field& v, double tol) {
    u_hat.require_compatible(v, "in_tangent_space");
    for (std::size_t z = 0; z < v.num_nodes(); ++z) {
        if (!(std::abs(dot(u_hat.node(z), v.node(z))) <= tol)) return false;
    }
    return true;
}

}  // namespace sphereflow
