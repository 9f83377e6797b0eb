#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cdknet/clustering.hpp"
#include "cdknet/errors.hpp"
#include "cdknet/kernels.hpp"
#include "cdknet/metrics.hpp"
#include "oracles.hpp"

using namespace cdknet;

namespace {

// Two tight 1-D blobs far apart; kernel block structure is unmistakable.
Matrix two_blob_points(SeededRng& rng) {
    Matrix x(8, 1);
    for (std::size_t i = 0; i < 4; ++i) x.at(i, 0) = 0.0 + 0.05 * rng.normal();
    for (std::size_t i = 4; i < 8; ++i) x.at(i, 0) = 25.0 + 0.05 * rng.normal();
    return x;
}

}  // namespace

TEST_SUITE_BEGIN("clustering");

TEST_CASE("kmeans separates two obvious 1-D clusters") {
    const Matrix x = Matrix::from_data(4, 1, {0.0, 0.1, 10.0, 10.1});
    SeededRng rng(1);
    const KMeansResult res = kmeans(x, 2, rng);
    CHECK(res.assignments[0] == res.assignments[1]);
    CHECK(res.assignments[2] == res.assignments[3]);
    CHECK(res.assignments[0] != res.assignments[2]);
    std::vector<double> centers = {res.centroids.at(0, 0), res.centroids.at(1, 0)};
    std::sort(centers.begin(), centers.end());
    CHECK(centers[0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(centers[1] == doctest::Approx(10.05).epsilon(1e-12));
}

TEST_CASE("k equal to n gives zero inertia; k beyond n throws") {
    SeededRng rng(2);
    const Matrix x = oracle::random_matrix(5, 3, rng);
    const KMeansResult res = kmeans(x, 5, rng);
    CHECK(res.inertia == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(kmeans(x, 6, rng), TooManyClusters);
}

TEST_CASE("kmeans with many restarts reaches the enumerated global optimum") {
    SeededRng rng(3);
    for (int t = 0; t < 5; ++t) {
        const Matrix x = oracle::random_matrix(7, 2, rng);
        SeededRng krng(100 + t);
        const KMeansResult res = kmeans(x, 2, 50, 300, krng);
        const double best = oracle::kmeans_global_inertia(x, 2);
        CHECK(res.inertia <= best + 1e-9);
        // Inertia field agrees with its own recomputation.
        double recomputed = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) {
                const double d = x.at(i, j) - res.centroids.at(res.assignments[i], j);
                recomputed += d * d;
            }
        CHECK(res.inertia == doctest::Approx(recomputed).epsilon(1e-12));
    }
}

TEST_CASE("restart monotonicity under nested seeds") {
    SeededRng data_rng(4);
    const Matrix x = oracle::random_matrix(40, 2, data_rng);
    double prev = 1e300;
    for (std::size_t restarts : {1ul, 3ul, 10ul}) {
        SeededRng rng(11);  // same stream; more restarts extend it
        const KMeansResult res = kmeans(x, 4, restarts, 300, rng);
        CHECK(res.inertia <= prev + 1e-12);
        prev = res.inertia;
    }
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
    SeededRng data_rng(5);
    const Matrix x = oracle::random_matrix(30, 3, data_rng);
    SeededRng r1(9), r2(9);
    const KMeansResult a = kmeans(x, 3, r1);
    const KMeansResult b = kmeans(x, 3, r2);
    CHECK(a.assignments == b.assignments);
    CHECK(a.inertia == b.inertia);
}

TEST_CASE("spectral embedding splits a block-diagonal kernel") {
    SeededRng rng(6);
    const Matrix x = two_blob_points(rng);
    const Matrix k = kernel_matrix(x, KernelSpec::gaussian(1.0));
    const SpectralEmbedding emb = spectral_embed(k, 2);

    // Orthonormal U.
    double defect = 0.0;
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q) {
            double dot = 0.0;
            for (std::size_t i = 0; i < 8; ++i) dot += emb.u.at(i, p) * emb.u.at(i, q);
            defect = std::max(defect, std::abs(dot - (p == q ? 1.0 : 0.0)));
        }
    CHECK(defect <= 1e-6);

    // K-means on the rows of U recovers the two blocks exactly.
    SeededRng krng(7);
    const KMeansResult res = kmeans(emb.u, 2, krng);
    const std::vector<int> truth = {0, 0, 0, 0, 1, 1, 1, 1};
    CHECK(clustering_accuracy(res.assignments, truth) == 1.0);
}

TEST_CASE("r=1 embedding is a single orthonormal column at the top eigenvalue") {
    SeededRng rng(8);
    const Matrix p = oracle::random_matrix(6, 2, rng);
    const Matrix k = kernel_matrix(p, KernelSpec::gaussian(1.0));
    const SpectralEmbedding emb = spectral_embed(k, 1);
    double norm = 0.0;
    for (std::size_t i = 0; i < 6; ++i) norm += emb.u.at(i, 0) * emb.u.at(i, 0);
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-10));

    const Matrix l = centered_normalized_kernel(k);
    const Matrix lu = oracle::naive_matmul(l, emb.u);
    double quad = 0.0;
    for (std::size_t i = 0; i < 6; ++i) quad += emb.u.at(i, 0) * lu.at(i, 0);
    CHECK(quad == doctest::Approx(emb.eigenvalues[0]).epsilon(1e-10));
}

TEST_CASE("embedding objective equals the top-r eigenvalue sum") {
    SeededRng rng(9);
    const Matrix p = oracle::random_matrix(10, 3, rng);
    const Matrix k = kernel_matrix(p, KernelSpec::gaussian(0.7));
    const std::size_t r = 3;
    const SpectralEmbedding emb = spectral_embed(k, r);
    const Matrix l = centered_normalized_kernel(k);
    const Matrix lu = oracle::naive_matmul(l, emb.u);
    double quad = 0.0, eigsum = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
        eigsum += emb.eigenvalues[j];
        for (std::size_t i = 0; i < 10; ++i) quad += emb.u.at(i, j) * lu.at(i, j);
    }
    CHECK(quad == doctest::Approx(eigsum).epsilon(1e-8));
}

TEST_CASE("spectral embedding maximizes HSIC with the linear kernel on U") {
    // hsic(normalized gaussian K_X, U U^T) at the returned U beats 1000
    // random orthonormal candidates.
    SeededRng rng(10);
    const std::size_t n = 12, r = 3;
    const Matrix p = oracle::random_matrix(n, 2, rng);
    const Matrix k = kernel_matrix(p, KernelSpec::gaussian(0.8));
    const Matrix kn = normalized_kernel(k);
    const SpectralEmbedding emb = spectral_embed(k, r);
    const double at_u = hsic(kn, matmul(emb.u, transpose(emb.u)));
    for (int t = 0; t < 1000; ++t) {
        const Matrix v = oracle::random_orthonormal(n, r, rng);
        CHECK(hsic(kn, matmul(v, transpose(v))) <= at_u + 1e-8);
    }
}

TEST_CASE("degenerate kernels are rejected") {
    CHECK_THROWS_AS(spectral_embed(Matrix(3, 3), 2), DegenerateKernel);
}

TEST_CASE("label-permutation invariance of inertia") {
    SeededRng rng(12);
    const Matrix x = oracle::random_matrix(20, 2, rng);
    SeededRng r1(3);
    const KMeansResult res = kmeans(x, 3, r1);
    // Relabel clusters arbitrarily: inertia is a property of the partition.
    std::vector<int> relabel = {2, 0, 1};
    double inertia = 0.0;
    Matrix centroids(3, 2);
    std::vector<std::size_t> count(3, 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const int c = relabel[res.assignments[i]];
        count[c]++;
        for (std::size_t j = 0; j < 2; ++j) centroids.at(c, j) += x.at(i, j);
    }
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t j = 0; j < 2; ++j) centroids.at(c, j) /= static_cast<double>(count[c]);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double d = x.at(i, j) - centroids.at(relabel[res.assignments[i]], j);
            inertia += d * d;
        }
    CHECK(inertia == doctest::Approx(res.inertia).epsilon(1e-10));
}

TEST_SUITE_END();
