#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cdknet {

// Dense row-major matrix of doubles. Immutable by convention once built:
// library code returns fresh matrices instead of mutating arguments.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}

    // Zero-initialized rows x cols.
    Matrix(std::size_t rows, std::size_t cols);

    // Validates shape and that every entry is finite.
    static Matrix from_data(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

private:
    std::size_t rows_, cols_;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Core operations. All are pure; dimension mismatches throw DimensionError.
// ---------------------------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);

// Subtracts the row vector v from every row of a.
Matrix rowwise_sub(const Matrix& a, std::span<const double> v);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

// Sum of elementwise products (the Frobenius inner product).
double elementwise_dot(const Matrix& a, const Matrix& b);

// Rows of a selected by idx, in idx order.
Matrix take_rows(const Matrix& a, std::span<const std::size_t> idx);

// Vertical stack [top; bottom].
Matrix vstack(const Matrix& top, const Matrix& bottom);

// Squared Euclidean distance between rows i and j of a.
double row_sqdist(const Matrix& a, std::size_t i, std::size_t j);

// ---------------------------------------------------------------------------
// Deterministic row parallelism: splits [0, n) into contiguous chunks, one
// per worker. Each chunk must only write state owned by its rows, so the
// result is bit-identical for any worker count. Worker count is
// min(CDKNET_THREADS or hardware_concurrency, n); CDKNET_THREADS=1 disables.
// ---------------------------------------------------------------------------
void parallel_rows(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace cdknet
