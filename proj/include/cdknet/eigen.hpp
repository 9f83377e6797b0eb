#pragma once

#include <cstddef>
#include <vector>

#include "cdknet/matrix.hpp"

namespace cdknet {

struct EigenPairs {
    std::vector<double> values;  // descending
    Matrix vectors;              // n x r, column i pairs with values[i]
};

// Full eigendecomposition of a symmetric matrix, truncated to the top r
// eigenpairs by eigenvalue. The input is symmetrized as (A + A^T)/2 before
// decomposition; floating-point products routinely leave small asymmetries.
//
// Method: Householder reduction to tridiagonal form followed by QL with
// implicit shifts, accumulating the orthogonal transform. Dense and direct;
// the matrices here stay desk-scale (n <= ~2000).
//
// Guarantees: columns orthonormal to ~1e-12, residual ||A v - lambda v||
// within 1e-6 * max(1, ||A||_F), eigenvalues sorted descending (ties keep
// their pre-sort order, so results are deterministic).
//
// Throws InvalidMatrix on non-finite input, DimensionError unless
// 1 <= r <= n, ConvergenceError if an eigenvalue fails to settle.
EigenPairs sym_eig_top_r(const Matrix& a, std::size_t r);

}  // namespace cdknet
