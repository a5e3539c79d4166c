#include "sphereflow/linalg.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sphereflow {

SparseMatrix::SparseMatrix(std::size_t nrows, std::size_t ncols,
                           std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> col_indices, std::vector<double> values)
    : nrows_(nrows),
      ncols_(ncols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
    if (row_offsets_.size() != nrows_ + 1 || row_offsets_.front() != 0 ||
        row_offsets_.back() != values_.size() || col_indices_.size() != values_.size()) {
        throw std::invalid_argument("SparseMatrix: inconsistent CSR arrays");
    }
    for (std::size_t i = 0; i < nrows_; ++i) {
        if (row_offsets_[i] > row_offsets_[i + 1]) {
            throw std::invalid_argument("SparseMatrix: row offsets not monotone");
        }
        for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            if (col_indices_[k] >= ncols_) {
                throw std::invalid_argument("SparseMatrix: column index out of range");
            }
            if (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1]) {
                throw std::invalid_argument("SparseMatrix: columns not strictly increasing");
            }
        }
    }
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
    const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != ncols_ || y.size() != nrows_) {
        throw std::invalid_argument("spmv: dimension mismatch");
    }
    for (std::size_t i = 0; i < nrows_; ++i) {
        double sum = 0.0;
        for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            sum += values_[k] * x[col_indices_[k]];
        }
        y[i] = sum;
    }
}

void SparseMatrix::multiply_block(std::span<const double> x, std::span<double> y,
                                  std::size_t m) const {
    if (x.size() != ncols_ * m || y.size() != nrows_ * m) {
        throw std::invalid_argument("spmv_block: dimension mismatch");
    }
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t i = 0; i < nrows_; ++i) {
        double* yi = y.data() + i * m;
        for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            const double a = values_[k];
            const double* xj = x.data() + col_indices_[k] * m;
            for (std::size_t c = 0; c < m; ++c) yi[c] += a * xj[c];
        }
    }
}

double SparseMatrix::symmetry_defect() const {
    if (nrows_ != ncols_) return std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (double v : values_) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return 0.0;
    double defect = 0.0;
    for (std::size_t i = 0; i < nrows_; ++i) {
        for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            defect = std::max(defect, std::abs(values_[k] - at(col_indices_[k], i)));
        }
    }
    return defect / scale;
}

SparseMatrix csr_from_triplets(std::span<const Triplet> triplets, std::size_t nrows,
                               std::size_t ncols) {
    for (const auto& t : triplets) {
        if (t.row >= nrows || t.col >= ncols) {
            std::ostringstream os;
            os << "csr_from_triplets: entry (" << t.row << ", " << t.col
               << ") out of range for " << nrows << "x" << ncols << " matrix";
            throw std::out_of_range(os.str());
        }
    }
    // Counting sort by row keeps the insertion order stable within a row.
    std::vector<std::size_t> count(nrows + 1, 0);
    for (const auto& t : triplets) ++count[t.row + 1];
    std::partial_sum(count.begin(), count.end(), count.begin());
    std::vector<std::size_t> order(triplets.size());
    {
        auto next = count;
        for (std::size_t k = 0; k < triplets.size(); ++k) order[next[triplets[k].row]++] = k;
    }

    std::vector<std::size_t> offsets(nrows + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    cols.reserve(triplets.size());
    vals.reserve(triplets.size());
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t i = 0; i < nrows; ++i) {
        row.clear();
        for (std::size_t k = count[i]; k < count[i + 1]; ++k) {
            const auto& t = triplets[order[k]];
            row.emplace_back(t.col, t.value);
        }
        std::stable_sort(row.begin(), row.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k > 0 && row[k].first == row[k - 1].first) {
                vals.back() += row[k].second;
            } else {
                cols.push_back(row[k].first);
                vals.push_back(row[k].second);
            }
        }
        offsets[i + 1] = cols.size();
    }
    return SparseMatrix(nrows, ncols, std::move(offsets), std::move(cols), std::move(vals));
}

Vector spmv(const SparseMatrix& a, std::span<const double> x) {
    Vector y(a.nrows());
    a.multiply(x, y);
    return y;
}

Vector spmv_block(const SparseMatrix& a, std::span<const double> x, std::size_t m) {
    Vector y(a.nrows() * m);
    a.multiply_block(x, y, m);
    return y;
}

double dot(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

namespace {

std::string convergence_message(std::size_t iterations, double residual) {
    std::ostringstream os;
    os << "cg_solve: no convergence after " << iterations
       << " iterations (relative residual " << residual << ")";
    return os.str();
}

}  // namespace

ConvergenceError::ConvergenceError(std::size_t iterations, double last_residual)
    : std::runtime_error(convergence_message(iterations, last_residual)),
      iterations_(iterations),
      last_residual_(last_residual) {}

CgResult cg_solve(const LinearOperator& apply, std::span<const double> b, double tol,
                  std::size_t maxiter) {
    const std::size_t n = b.size();
    CgResult result;
    result.x.assign(n, 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) return result;
    if (maxiter == 0) maxiter = 10 * n + 10;

    Vector r(b.begin(), b.end());
    Vector p = r;
    Vector ap(n);
    double rr = dot(r, r);
    const double target = tol * bnorm;

    for (std::size_t it = 1; it <= maxiter; ++it) {
        apply(p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) {
            result.iterations = it;
            throw ConvergenceError(it, std::sqrt(rr) / bnorm);
        }
        const double alpha = rr / pap;
        for (std::size_t i = 0; i < n; ++i) {
            result.x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        const double rr_new = dot(r, r);
        if (std::sqrt(rr_new) <= target) {
            // Confirm against the true residual; restart from it if the
            // recursive one has drifted.
            apply(result.x, ap);
            for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
            const double true_rr = dot(r, r);
            if (std::sqrt(true_rr) <= target) {
                result.iterations = it;
                result.relative_residual = std::sqrt(true_rr) / bnorm;
                return result;
            }
            p = r;
            rr = true_rr;
            continue;
        }
        const double beta = rr_new / rr;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        rr = rr_new;
    }
    throw ConvergenceError(maxiter, std::sqrt(rr) / bnorm);
}

Vector DenseMatrix::multiply(std::span<const double> x) const {
    if (x.size() != cols_) throw std::invalid_argument("DenseMatrix::multiply: dimension mismatch");
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) s += data_[i * cols_ + j] * x[j];
        y[i] = s;
    }
    return y;
}

DenseMatrix DenseMatrix::from_sparse(const SparseMatrix& a) {
    DenseMatrix d(a.nrows(), a.ncols());
    for (std::size_t i = 0; i < a.nrows(); ++i) {
        for (std::size_t k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k) {
            d(i, a.col_indices()[k]) = a.values()[k];
        }
    }
    return d;
}

namespace {

std::string singular_message(std::size_t pivot_index, double pivot_value) {
    std::ostringstream os;
    os << "dense_solve: singular matrix, pivot " << pivot_index << " has magnitude "
       << pivot_value;
    return os.str();
}

}  // namespace

SingularMatrixError::SingularMatrixError(std::size_t pivot_index, double pivot_value)
    : std::runtime_error(singular_message(pivot_index, pivot_value)), pivot_index_(pivot_index) {}

Vector dense_solve(DenseMatrix a, std::span<const double> b) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("dense_solve: matrix not square");
    if (b.size() != n) throw std::invalid_argument("dense_solve: dimension mismatch");

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(a(i, j)));
    const double threshold = 1e-12 * scale;

    Vector x(b.begin(), b.end());
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        }
        if (!(std::abs(a(piv, k)) > threshold)) throw SingularMatrixError(k, std::abs(a(piv, k)));
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(x[k], x[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            x[i] -= f * x[k];
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        double s = x[k];
        for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * x[j];
        x[k] = s / a(k, k);
    }
    return x;
}

}  // namespace sphereflow
