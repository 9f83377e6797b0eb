#pragma once

#include <optional>

#include "cdknet/matrix.hpp"

namespace cdknet {

enum class KernelKind { Gaussian, Linear };

// Kernel choice plus bandwidth. A Gaussian spec with no sigma means
// "resolve via the median heuristic from the data at hand".
struct KernelSpec {
    KernelKind kind = KernelKind::Gaussian;
    std::optional<double> sigma;  // Gaussian only; must be > 0 when set

    static KernelSpec gaussian(double sigma_value) {
        return {KernelKind::Gaussian, sigma_value};
    }
    static KernelSpec gaussian_median() { return {KernelKind::Gaussian, std::nullopt}; }
    static KernelSpec linear() { return {KernelKind::Linear, std::nullopt}; }
};

// Bandwidth from the median of nonzero pairwise Euclidean distances,
// divided by sqrt(2) so that 2*sigma^2 equals the median squared distance.
// Throws DegenerateBandwidth when every pairwise distance is zero.
double median_heuristic_sigma(const Matrix& points);

// N x N kernel matrix over the rows of `points`.
// Gaussian: k(p,q) = exp(-||p-q||^2 / (2 sigma^2)), unit diagonal.
// Linear:   K = P P^T.
Matrix kernel_matrix(const Matrix& points, const KernelSpec& spec);

// D^{-1/2} K D^{-1/2} with D = diag(K 1). Throws DegenerateKernel when a
// row sum is not strictly positive.
Matrix normalized_kernel(const Matrix& k);

// Row sums of a kernel matrix (the diagonal of its degree matrix).
std::vector<double> degree_vector(const Matrix& k);

// H K H with H = I - (1/N) 11^T, computed in O(N^2).
Matrix center_kernel(const Matrix& k);

// Empirical HSIC: tr(K_P H K_Q H) / (N-1)^2.
double hsic(const Matrix& kp, const Matrix& kq);

// Gradient of hsic(K_Z, K_other) with respect to the embedded points Z,
// where K_Z is the Gaussian kernel on Z at the spec's (resolved) sigma.
// With `normalized` set, K_Z enters as D^{-1/2} K_Z D^{-1/2}; the degree
// vector and sigma are frozen at the current Z (no derivative terms), the
// same convention the finite-difference oracle must use.
// Throws UnsupportedKernel for a non-Gaussian spec or an unresolved sigma.
Matrix hsic_grad_wrt_embedding(const Matrix& z, const Matrix& k_other, const KernelSpec& spec,
                               bool normalized);

}  // namespace cdknet
