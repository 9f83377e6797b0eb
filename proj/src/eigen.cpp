#include "cdknet/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdknet/errors.hpp"

namespace cdknet {

namespace {

constexpr std::size_t kMaxQlIterations = 50;

// Householder reduction of a symmetric matrix to tridiagonal form.
// On entry v holds the symmetric matrix; on exit it holds the accumulated
// orthogonal transform, d the diagonal and e the off-diagonal (e[0] unused).
// Classic tred2 formulation (Wilkinson-Reinsch).
void tridiagonalize(Matrix& v, std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = v.rows();
    for (std::size_t j = 0; j < n; ++j) d[j] = v.at(n - 1, j);

    for (std::size_t i = n - 1; i > 0; --i) {
        double h = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
        if (scale == 0.0) {
            e[i] = d[i - 1];
            for (std::size_t j = 0; j < i; ++j) {
                d[j] = v.at(i - 1, j);
                v.at(i, j) = 0.0;
                v.at(j, i) = 0.0;
            }
        } else {
            for (std::size_t k = 0; k < i; ++k) {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            double f = d[i - 1];
            double g = std::sqrt(h);
            if (f > 0.0) g = -g;
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;

            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                v.at(j, i) = f;
                g = e[j] + v.at(j, j) * f;
                for (std::size_t k = j + 1; k < i; ++k) {
                    g += v.at(k, j) * d[k];
                    e[k] += v.at(k, j) * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for (std::size_t j = 0; j < i; ++j) {
                e[j] /= h;
                f += e[j] * d[j];
            }
            const double hh = f / (h + h);
            for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
            for (std::size_t j = 0; j < i; ++j) {
                f = d[j];
                g = e[j];
                for (std::size_t k = j; k < i; ++k) v.at(k, j) -= f * e[k] + g * d[k];
                d[j] = v.at(i - 1, j);
                v.at(i, j) = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate the Householder transforms.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        v.at(n - 1, i) = v.at(i, i);
        v.at(i, i) = 1.0;
        const double h = d[i + 1];
        if (h != 0.0) {
            for (std::size_t k = 0; k <= i; ++k) d[k] = v.at(k, i + 1) / h;
            for (std::size_t j = 0; j <= i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k <= i; ++k) g += v.at(k, i + 1) * v.at(k, j);
                for (std::size_t k = 0; k <= i; ++k) v.at(k, j) -= g * d[k];
            }
        }
        for (std::size_t k = 0; k <= i; ++k) v.at(k, i + 1) = 0.0;
    }
    for (std::size_t j = 0; j < n; ++j) {
        d[j] = v.at(n - 1, j);
        v.at(n - 1, j) = 0.0;
    }
    v.at(n - 1, n - 1) = 1.0;
    e[0] = 0.0;
}

// QL with implicit shifts on the tridiagonal (d, e), rotating the columns
// of v along. Eigenvalues land in d unordered; eigenvectors are columns of v.
void ql_implicit(Matrix& v, std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = v.rows();
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;

    double f = 0.0, tst1 = 0.0;
    const double eps = std::pow(2.0, -52.0);
    for (std::size_t l = 0; l < n; ++l) {
        tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
        std::size_t m = l;
        while (m < n && std::abs(e[m]) > eps * tst1) ++m;

        if (m > l) {
            std::size_t iter = 0;
            do {
                if (++iter > kMaxQlIterations)
                    throw ConvergenceError("eigensolver failed to converge", iter - 1);

                double g = d[l];
                double p = (d[l + 1] - g) / (2.0 * e[l]);
                double r = std::hypot(p, 1.0);
                if (p < 0.0) r = -r;
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                const double dl1 = d[l + 1];
                double h = g - d[l];
                for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
                f += h;

                p = d[m];
                double c = 1.0, c2 = c, c3 = c;
                const double el1 = e[l + 1];
                double s = 0.0, s2 = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = std::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for (std::size_t k = 0; k < n; ++k) {
                        h = v.at(k, i + 1);
                        v.at(k, i + 1) = s * v.at(k, i) + c * h;
                        v.at(k, i) = c * v.at(k, i) - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
            } while (std::abs(e[l]) > eps * tst1);
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

}  // namespace

EigenPairs sym_eig_top_r(const Matrix& a, std::size_t r) {
    if (a.rows() != a.cols()) throw DimensionError("sym_eig_top_r: matrix must be square");
    const std::size_t n = a.rows();
    if (r < 1 || r > n) throw DimensionError("sym_eig_top_r: need 1 <= r <= n");
    if (!a.all_finite()) throw InvalidMatrix("sym_eig_top_r: non-finite entries");

    // Symmetrize silently; callers feed products that drift off-symmetric.
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) v.at(i, j) = 0.5 * (a.at(i, j) + a.at(j, i));

    std::vector<double> d(n), e(n, 0.0);
    if (n == 1) {
        d[0] = v.at(0, 0);
        v.at(0, 0) = 1.0;
    } else {
        tridiagonalize(v, d, e);
        ql_implicit(v, d, e);
    }

    // Sort descending; stable in the original index for equal eigenvalues.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&d](std::size_t x, std::size_t y) { return d[x] > d[y]; });

    EigenPairs out;
    out.values.resize(r);
    out.vectors = Matrix(n, r);
    for (std::size_t j = 0; j < r; ++j) {
        out.values[j] = d[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, j) = v.at(i, order[j]);
    }
    return out;
}

}  // namespace cdknet
