#include "cdknet/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

#include "cdknet/errors.hpp"

namespace cdknet {

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be >= 1");
    data_.assign(rows * cols, 0.0);
}

Matrix Matrix::from_data(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be >= 1");
    if (data.size() != rows * cols)
        throw DimensionError("entry count " + std::to_string(data.size()) + " != " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    Matrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(data);
    if (!m.all_finite()) throw InvalidMatrix("matrix contains non-finite entries");
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

std::size_t worker_count() {
    static const std::size_t cached = [] {
        if (const char* env = std::getenv("CDKNET_THREADS")) {
            long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return static_cast<std::size_t>(v);
        }
        unsigned hw = std::thread::hardware_concurrency();
        return static_cast<std::size_t>(hw == 0 ? 1 : hw);
    }();
    return cached;
}

}  // namespace

void parallel_rows(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Matrix c(a.rows(), b.cols());
    const std::size_t inner = a.cols(), bc = b.cols();
    const double* bd = b.data().data();
    // i-k-j order: row i of c accumulates over k in a fixed order, so the
    // per-row results do not depend on how rows are split across workers.
    auto block = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* crow = c.data().data() + i * bc;
            const double* arow = a.data().data() + i * inner;
            for (std::size_t k = 0; k < inner; ++k) {
                const double aik = arow[k];
                if (aik == 0.0) continue;
                const double* brow = bd + k * bc;
                for (std::size_t j = 0; j < bc; ++j) crow[j] += aik * brow[j];
            }
        }
    };
    if (a.rows() * inner * bc >= (std::size_t{1} << 20))
        parallel_rows(a.rows(), block);
    else
        block(0, a.rows());
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

double trace(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("trace: matrix must be square");
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a.at(i, i);
    return s;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

Matrix rowwise_sub(const Matrix& a, std::span<const double> v) {
    if (v.size() != a.cols()) throw DimensionError("rowwise_sub: vector length != column count");
    Matrix r = a;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto row = r.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) row[j] -= v[j];
    }
    return r;
}

static void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch");
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] += b.data()[i];
    return r;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] -= b.data()[i];
    return r;
}

Matrix scale(const Matrix& a, double s) {
    Matrix r = a;
    for (double& v : r.data()) v *= s;
    return r;
}

double elementwise_dot(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "elementwise_dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

Matrix take_rows(const Matrix& a, std::span<const std::size_t> idx) {
    if (idx.empty()) throw DimensionError("take_rows: empty index set");
    Matrix r(idx.size(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= a.rows()) throw DimensionError("take_rows: index out of range");
        auto src = a.row(idx[i]);
        std::copy(src.begin(), src.end(), r.row(i).begin());
    }
    return r;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
    if (top.cols() != bottom.cols()) throw DimensionError("vstack: column mismatch");
    Matrix r(top.rows() + bottom.rows(), top.cols());
    std::copy(top.data().begin(), top.data().end(), r.data().begin());
    std::copy(bottom.data().begin(), bottom.data().end(), r.data().begin() + top.size());
    return r;
}

double row_sqdist(const Matrix& a, std::size_t i, std::size_t j) {
    double s = 0.0;
    auto ri = a.row(i), rj = a.row(j);
    for (std::size_t k = 0; k < a.cols(); ++k) {
        const double d = ri[k] - rj[k];
        s += d * d;
    }
    return s;
}

}  // namespace cdknet
