#include "cdknet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdknet/errors.hpp"

namespace cdknet {

double median_heuristic_sigma(const Matrix& points) {
    const std::size_t n = points.rows();
    if (n < 2) throw DimensionError("median_heuristic_sigma: need at least 2 points");
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d2 = row_sqdist(points, i, j);
            if (d2 > 0.0) dists.push_back(std::sqrt(d2));
        }
    if (dists.empty())
        throw DegenerateBandwidth("median heuristic: all pairwise distances are zero");
    std::sort(dists.begin(), dists.end());
    const std::size_t m = dists.size();
    const double median =
        (m % 2 == 1) ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
    return median / std::sqrt(2.0);
}

static double resolve_sigma(const Matrix& points, const KernelSpec& spec) {
    if (spec.sigma.has_value()) {
        if (*spec.sigma <= 0.0) throw ConfigError("kernel sigma must be > 0");
        return *spec.sigma;
    }
    return median_heuristic_sigma(points);
}

Matrix kernel_matrix(const Matrix& points, const KernelSpec& spec) {
    const std::size_t n = points.rows();
    if (n < 2) throw DimensionError("kernel_matrix: need at least 2 points");

    if (spec.kind == KernelKind::Linear) return matmul(points, transpose(points));

    const double sigma = resolve_sigma(points, spec);
    const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
    Matrix k(n, n);
    parallel_rows(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            k.at(i, i) = 1.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                k.at(i, j) = std::exp(-row_sqdist(points, i, j) * inv_2s2);
            }
        }
    });
    return k;
}

std::vector<double> degree_vector(const Matrix& k) {
    if (k.rows() != k.cols()) throw DimensionError("degree_vector: matrix must be square");
    std::vector<double> deg(k.rows(), 0.0);
    for (std::size_t i = 0; i < k.rows(); ++i) {
        double s = 0.0;
        for (double v : k.row(i)) s += v;
        deg[i] = s;
    }
    return deg;
}

Matrix normalized_kernel(const Matrix& k) {
    const auto deg = degree_vector(k);
    std::vector<double> inv_sqrt(deg.size());
    for (std::size_t i = 0; i < deg.size(); ++i) {
        if (deg[i] <= 0.0)
            throw DegenerateKernel("normalized_kernel: row " + std::to_string(i) +
                                   " has non-positive sum");
        inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
    }
    Matrix out(k.rows(), k.cols());
    for (std::size_t i = 0; i < k.rows(); ++i)
        for (std::size_t j = 0; j < k.cols(); ++j)
            out.at(i, j) = inv_sqrt[i] * k.at(i, j) * inv_sqrt[j];
    return out;
}

Matrix center_kernel(const Matrix& k) {
    if (k.rows() != k.cols()) throw DimensionError("center_kernel: matrix must be square");
    const std::size_t n = k.rows();
    std::vector<double> row_mean(n, 0.0), col_mean(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double v = k.at(i, j);
            row_mean[i] += v;
            col_mean[j] += v;
            total += v;
        }
    for (std::size_t i = 0; i < n; ++i) {
        row_mean[i] /= static_cast<double>(n);
        col_mean[i] /= static_cast<double>(n);
    }
    total /= static_cast<double>(n) * static_cast<double>(n);
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.at(i, j) = k.at(i, j) - row_mean[i] - col_mean[j] + total;
    return out;
}

double hsic(const Matrix& kp, const Matrix& kq) {
    if (kp.rows() != kp.cols() || kq.rows() != kq.cols() || kp.rows() != kq.rows())
        throw DimensionError("hsic: kernels must be square and equally sized");
    const std::size_t n = kp.rows();
    if (n < 2) throw DimensionError("hsic: need N >= 2");
    // tr(K_P H K_Q H) = <H K_P H, H K_Q H> by idempotence of H; centering
    // both sides makes the value exactly symmetric in its arguments.
    const double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);
    return elementwise_dot(center_kernel(kp), center_kernel(kq)) / denom;
}

Matrix hsic_grad_wrt_embedding(const Matrix& z, const Matrix& k_other, const KernelSpec& spec,
                               bool normalized) {
    if (spec.kind != KernelKind::Gaussian)
        throw UnsupportedKernel("hsic_grad_wrt_embedding: only the Gaussian kernel is supported");
    if (!spec.sigma.has_value())
        throw UnsupportedKernel("hsic_grad_wrt_embedding: sigma must be resolved before the call");
    const std::size_t n = z.rows(), d = z.cols();
    if (k_other.rows() != n || k_other.cols() != n)
        throw DimensionError("hsic_grad_wrt_embedding: K_other must be N x N");

    const double sigma = *spec.sigma;
    const Matrix k = kernel_matrix(z, KernelSpec::gaussian(sigma));
    Matrix m = center_kernel(k_other);
    if (normalized) {
        // Degree vector frozen at the current Z: stop-gradient through D.
        const auto deg = degree_vector(k);
        std::vector<double> inv_sqrt(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (deg[i] <= 0.0) throw DegenerateKernel("hsic_grad_wrt_embedding: zero degree");
            inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m.at(i, j) *= inv_sqrt[i] * inv_sqrt[j];
    }

    // With W = M o K, the objective Sum_ij W_ij / (N-1)^2 differentiates to
    //   grad_a = c * Sum_j W_aj (z_a - z_j),  c = -2 / (sigma^2 (N-1)^2),
    // using dK_ij/dz_i = -(z_i - z_j)/sigma^2 * K_ij and symmetry of M.
    // Accumulating the differences directly keeps coincident rows at an
    // exact zero gradient.
    const double c = -2.0 / (sigma * sigma * static_cast<double>(n - 1) * static_cast<double>(n - 1));
    Matrix grad(n, d);
    parallel_rows(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a) {
            auto out = grad.row(a);
            auto za = z.row(a);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == a) continue;
                const double w = m.at(a, j) * k.at(a, j);
                auto zj = z.row(j);
                for (std::size_t t = 0; t < d; ++t) out[t] += w * (za[t] - zj[t]);
            }
            for (std::size_t t = 0; t < d; ++t) out[t] *= c;
        }
    });
    return grad;
}

}  // namespace cdknet
