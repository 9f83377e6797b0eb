#pragma once

// Independent brute-force oracles used by the test and acceptance suites.
// Everything here is written against the definitions directly (explicit
// loops, explicit centering matrices) and never calls the library path it
// is checking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <vector>

#include "cdknet/matrix.hpp"
#include "cdknet/rng.hpp"

namespace oracle {

using cdknet::Matrix;
using cdknet::SeededRng;

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

inline Matrix explicit_centering_matrix(std::size_t n) {
    Matrix h(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            h.at(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(n);
    return h;
}

// HSIC by the definition: build H, multiply out K_P H K_Q H, take the trace.
inline double hsic_by_double_centering(const Matrix& kp, const Matrix& kq) {
    const std::size_t n = kp.rows();
    const Matrix h = explicit_centering_matrix(n);
    const Matrix prod = naive_matmul(naive_matmul(naive_matmul(kp, h), kq), h);
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i) tr += prod.at(i, i);
    const double nm1 = static_cast<double>(n - 1);
    return tr / (nm1 * nm1);
}

// HSIC by the expanded summation form, computed with naive loops:
//   [ sum_ij Kp_ij Kq_ij - (2/N) sum_i (Kp 1)_i (Kq 1)_i + (1/N^2)(sum Kp)(sum Kq) ] / (N-1)^2
inline double hsic_by_expanded_sums(const Matrix& kp, const Matrix& kq) {
    const std::size_t n = kp.rows();
    double dot = 0.0, total_p = 0.0, total_q = 0.0, cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double rp = 0.0, rq = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            dot += kp.at(i, j) * kq.at(i, j);
            rp += kp.at(i, j);
            rq += kq.at(i, j);
        }
        cross += rp * rq;
        total_p += rp;
        total_q += rq;
    }
    const double dn = static_cast<double>(n);
    const double nm1 = dn - 1.0;
    return (dot - 2.0 / dn * cross + total_p * total_q / (dn * dn)) / (nm1 * nm1);
}

// Objective that hsic_grad_wrt_embedding differentiates, with the degree
// vector (when normalizing) and sigma frozen to the base point. Used for
// central finite differences.
struct FrozenHsicObjective {
    Matrix m_centered;             // H K_other H, degree-scaled when normalized
    double sigma;

    static FrozenHsicObjective at(const Matrix& z, const Matrix& k_other, double sigma,
                                  bool normalized) {
        const std::size_t n = z.rows();
        const Matrix h = explicit_centering_matrix(n);
        Matrix m = naive_matmul(naive_matmul(h, k_other), h);
        if (normalized) {
            std::vector<double> deg(n, 0.0);
            const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double d2 = 0.0;
                    for (std::size_t k = 0; k < z.cols(); ++k) {
                        const double d = z.at(i, k) - z.at(j, k);
                        d2 += d * d;
                    }
                    deg[i] += std::exp(-d2 * inv_2s2);
                }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    m.at(i, j) /= std::sqrt(deg[i]) * std::sqrt(deg[j]);
        }
        return {m, sigma};
    }

    double operator()(const Matrix& z) const {
        const std::size_t n = z.rows();
        const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double d2 = 0.0;
                for (std::size_t k = 0; k < z.cols(); ++k) {
                    const double d = z.at(i, k) - z.at(j, k);
                    d2 += d * d;
                }
                acc += std::exp(-d2 * inv_2s2) * m_centered.at(i, j);
            }
        const double nm1 = static_cast<double>(n - 1);
        return acc / (nm1 * nm1);
    }
};

inline Matrix central_difference_grad(const std::function<double(const Matrix&)>& f, Matrix z,
                                      double h) {
    Matrix g(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) {
            const double orig = z.at(i, j);
            z.at(i, j) = orig + h;
            const double fp = f(z);
            z.at(i, j) = orig - h;
            const double fm = f(z);
            z.at(i, j) = orig;
            g.at(i, j) = (fp - fm) / (2.0 * h);
        }
    return g;
}

// max_ij |a_ij - b_ij| scaled by max(1e-8, max_ij |b_ij|).
inline double max_relative_error(const Matrix& a, const Matrix& b) {
    double num = 0.0, den = 1e-8;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a.data()[i] - b.data()[i]));
        den = std::max(den, std::abs(b.data()[i]));
    }
    return num / den;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

inline Matrix random_symmetric(std::size_t n, SeededRng& rng) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double v = rng.normal();
            m.at(i, j) = v;
            m.at(j, i) = v;
        }
    return m;
}

inline Matrix random_psd(std::size_t n, SeededRng& rng) {
    const Matrix b = random_matrix(n, n, rng);
    return naive_matmul(b, cdknet::transpose(b));
}

// Orthonormal n x r via modified Gram-Schmidt on a random Gaussian matrix.
inline Matrix random_orthonormal(std::size_t n, std::size_t r, SeededRng& rng) {
    Matrix q = random_matrix(n, r, rng);
    for (std::size_t j = 0; j < r; ++j) {
        for (std::size_t p = 0; p < j; ++p) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += q.at(i, p) * q.at(i, j);
            for (std::size_t i = 0; i < n; ++i) q.at(i, j) -= dot * q.at(i, p);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += q.at(i, j) * q.at(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) return random_orthonormal(n, r, rng);  // redraw on collapse
        for (std::size_t i = 0; i < n; ++i) q.at(i, j) /= norm;
    }
    return q;
}

// ---------------------------------------------------------------------------
// Clustering metric oracles
// ---------------------------------------------------------------------------

inline std::vector<std::vector<long long>> contingency(const std::vector<int>& pred,
                                                       const std::vector<int>& truth) {
    int kp = 0, kt = 0;
    for (int v : pred) kp = std::max(kp, v + 1);
    for (int v : truth) kt = std::max(kt, v + 1);
    std::vector<std::vector<long long>> c(kp, std::vector<long long>(kt, 0));
    for (std::size_t i = 0; i < pred.size(); ++i) c[pred[i]][truth[i]]++;
    return c;
}

// Clustering accuracy by enumerating every injective cluster -> class map
// (padded to a square of size max(kp, kt)); feasible for <= ~6 clusters.
inline double acc_by_enumeration(const std::vector<int>& pred, const std::vector<int>& truth) {
    const auto c = contingency(pred, truth);
    const std::size_t kp = c.size(), kt = c[0].size();
    const std::size_t k = std::max(kp, kt);
    std::vector<std::size_t> perm(k);
    for (std::size_t i = 0; i < k; ++i) perm[i] = i;
    long long best = 0;
    do {
        long long matched = 0;
        for (std::size_t i = 0; i < kp; ++i)
            if (perm[i] < kt) matched += c[i][perm[i]];
        best = std::max(best, matched);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(pred.size());
}

// ARI by explicit pair counting over all O(n^2) sample pairs.
inline double ari_by_pair_counting(const std::vector<int>& pred, const std::vector<int>& truth) {
    const std::size_t n = pred.size();
    long long both_same = 0, pred_same = 0, truth_same = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool ps = pred[i] == pred[j];
            const bool ts = truth[i] == truth[j];
            both_same += ps && ts;
            pred_same += ps;
            truth_same += ts;
            ++total;
        }
    const double expected =
        static_cast<double>(pred_same) * static_cast<double>(truth_same) / static_cast<double>(total);
    const double maximum = 0.5 * static_cast<double>(pred_same + truth_same);
    const double denom = maximum - expected;
    if (std::abs(denom) < 1e-12) {
        // Degenerate: both all-singleton or both one-cluster.
        std::map<int, int> pa, tb;
        std::vector<int> np(n), nt(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!pa.count(pred[i])) pa[pred[i]] = static_cast<int>(pa.size());
            if (!tb.count(truth[i])) tb[truth[i]] = static_cast<int>(tb.size());
            np[i] = pa[pred[i]];
            nt[i] = tb[truth[i]];
        }
        return np == nt ? 1.0 : 0.0;
    }
    return (static_cast<double>(both_same) - expected) / denom;
}

// NMI from the contingency table with natural logs.
inline double nmi_by_contingency(const std::vector<int>& pred, const std::vector<int>& truth) {
    const auto c = contingency(pred, truth);
    const double n = static_cast<double>(pred.size());
    std::vector<double> a(c.size(), 0.0), b(c[0].size(), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c[0].size(); ++j) {
            a[i] += static_cast<double>(c[i][j]);
            b[j] += static_cast<double>(c[i][j]);
        }
    double hp = 0.0, ht = 0.0, mi = 0.0;
    for (double v : a)
        if (v > 0) hp -= v / n * std::log(v / n);
    for (double v : b)
        if (v > 0) ht -= v / n * std::log(v / n);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c[0].size(); ++j)
            if (c[i][j] > 0) {
                const double pij = static_cast<double>(c[i][j]) / n;
                mi += pij * std::log(pij * n * n / (a[i] * b[j]));
            }
    if (hp <= 1e-15 && ht <= 1e-15) return 1.0;
    if (hp <= 1e-15 || ht <= 1e-15) return 0.0;
    return mi / std::sqrt(hp * ht);
}

// Global k-means optimum by enumerating every assignment (k^n candidates).
inline double kmeans_global_inertia(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows(), d = x.cols();
    std::vector<std::size_t> assign(n, 0);
    double best = 1e300;
    const std::size_t combos = static_cast<std::size_t>(std::pow(double(k), double(n)));
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i) {
            assign[i] = c % k;
            c /= k;
        }
        std::vector<std::vector<double>> centroid(k, std::vector<double>(d, 0.0));
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            count[assign[i]]++;
            for (std::size_t j = 0; j < d; ++j) centroid[assign[i]][j] += x.at(i, j);
        }
        bool feasible = true;
        for (std::size_t c2 = 0; c2 < k; ++c2) {
            if (count[c2] == 0) {
                feasible = false;
                break;
            }
            for (std::size_t j = 0; j < d; ++j) centroid[c2][j] /= static_cast<double>(count[c2]);
        }
        if (!feasible) continue;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x.at(i, j) - centroid[assign[i]][j];
                inertia += diff * diff;
            }
        best = std::min(best, inertia);
    }
    return best;
}

}  // namespace oracle
