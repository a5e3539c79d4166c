#pragma once

/// @file linalg.hpp
/// @brief CSR storage, sparse products, matrix-free CG and a dense direct solver.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sphereflow {

using Vector = std::vector<double>;

struct Triplet {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

/// Compressed row storage. Column indices are strictly increasing within a row.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(std::size_t nrows, std::size_t ncols, std::vector<std::size_t> row_offsets,
                 std::vector<std::size_t> col_indices, std::vector<double> values);

    std::size_t nrows() const { return nrows_; }
    std::size_t ncols() const { return ncols_; }
    std::size_t nnz() const { return values_.size(); }

    const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
    const std::vector<std::size_t>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }

    /// Entry (i, j); zero when not stored.
    double at(std::size_t i, std::size_t j) const;

    /// y = A x, overwriting y.
    void multiply(std::span<const double> x, std::span<double> y) const;

    /// Applies A to each of the m interleaved components of a node-major block vector.
    void multiply_block(std::span<const double> x, std::span<double> y, std::size_t m) const;

    /// Largest |A_ij - A_ji| relative to the largest stored magnitude.
    double symmetry_defect() const;

private:
    std::size_t nrows_ = 0;
    std::size_t ncols_ = 0;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<std::size_t> col_indices_;
    std::vector<double> values_;
};

/// Sums duplicate entries and sorts each row by column.
SparseMatrix csr_from_triplets(std::span<const Triplet> triplets, std::size_t nrows,
                               std::size_t ncols);

Vector spmv(const SparseMatrix& a, std::span<const double> x);

/// Block product for node-major fields with m components per node.
Vector spmv_block(const SparseMatrix& a, std::span<const double> x, std::size_t m);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

struct CgResult {
    Vector x;
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(std::size_t iterations, double last_residual);
    std::size_t iterations() const { return iterations_; }
    double last_residual() const { return last_residual_; }

private:
    std::size_t iterations_;
    double last_residual_;
};

/// Plain conjugate gradients on an SPD operator. Stops once the true residual
/// satisfies ||apply(x) - b|| <= tol ||b||. maxiter == 0 selects 10 * size + 10.
CgResult cg_solve(const LinearOperator& apply, std::span<const double> b, double tol = 1e-12,
                  std::size_t maxiter = 0);

/// Row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    Vector multiply(std::span<const double> x) const;

    static DenseMatrix from_sparse(const SparseMatrix& a);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class SingularMatrixError : public std::runtime_error {
public:
    SingularMatrixError(std::size_t pivot_index, double pivot_value);
    std::size_t pivot_index() const { return pivot_index_; }

private:
    std::size_t pivot_index_;
};

/// Gaussian elimination with row partial pivoting. A pivot below 1e-12 times the
/// largest entry of A is treated as singular.
Vector dense_solve(DenseMatrix a, std::span<const double> b);

}  // namespace sphereflow
