#pragma once

#include <cstddef>
#include <vector>

#include "cdknet/matrix.hpp"
#include "cdknet/rng.hpp"

namespace cdknet {

struct KMeansResult {
    Matrix centroids;             // k x d
    std::vector<int> assignments; // length n, values in [0, k)
    double inertia = 0.0;         // sum of squared distances to assigned centroid
};

// Lloyd's algorithm with k-means++ seeding. Runs `restarts` independent
// starts off one rng stream (so larger restart counts extend, never replace,
// smaller ones) and keeps the lowest inertia, ties broken by restart index.
// Iterates to an assignment fixpoint or max_iter; an emptied cluster is
// re-seeded from the point farthest from its centroid.
// Throws TooManyClusters when k > n.
KMeansResult kmeans(const Matrix& x, std::size_t k, std::size_t restarts, std::size_t max_iter,
                    SeededRng& rng);

inline KMeansResult kmeans(const Matrix& x, std::size_t k, SeededRng& rng) {
    return kmeans(x, k, 10, 300, rng);
}

struct SpectralEmbedding {
    Matrix u;                     // n x r, orthonormal columns
    std::vector<double> eigenvalues;  // descending
};

// Top-r eigenvectors of H D^{-1/2} K D^{-1/2} H for a kernel matrix K.
// Throws DegenerateKernel when K has a non-positive row sum.
SpectralEmbedding spectral_embed(const Matrix& k, std::size_t r);

// The centered normalized kernel H D^{-1/2} K D^{-1/2} H itself.
Matrix centered_normalized_kernel(const Matrix& k);

}  // namespace cdknet
