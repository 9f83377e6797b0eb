#include "cdknet/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdknet/eigen.hpp"
#include "cdknet/errors.hpp"
#include "cdknet/kernels.hpp"

namespace cdknet {

namespace {

double sqdist_to(const Matrix& x, std::size_t i, const Matrix& centroids, std::size_t c) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const double d = x.at(i, j) - centroids.at(c, j);
        s += d * d;
    }
    return s;
}

// k-means++: first center uniform, the rest proportional to squared
// distance from the nearest chosen center.
Matrix seed_centroids(const Matrix& x, std::size_t k, SeededRng& rng) {
    const std::size_t n = x.rows(), d = x.cols();
    Matrix centroids(k, d);
    std::vector<double> dist2(n, std::numeric_limits<double>::max());

    std::size_t first = rng.index(n);
    std::copy(x.row(first).begin(), x.row(first).end(), centroids.row(0).begin());

    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dist2[i] = std::min(dist2[i], sqdist_to(x, i, centroids, c - 1));
            total += dist2[i];
        }
        std::size_t chosen;
        if (total <= 0.0) {
            chosen = rng.index(n);  // all points coincide with chosen centers
        } else {
            const double target = rng.uniform01() * total;
            double acc = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        }
        std::copy(x.row(chosen).begin(), x.row(chosen).end(), centroids.row(c).begin());
    }
    return centroids;
}

KMeansResult lloyd_once(const Matrix& x, std::size_t k, std::size_t max_iter, SeededRng& rng) {
    const std::size_t n = x.rows(), d = x.cols();
    Matrix centroids = seed_centroids(x, k, rng);
    std::vector<int> assign(n, -1);

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sqdist_to(x, i, centroids, 0);
            for (std::size_t c = 1; c < k; ++c) {
                const double dd = sqdist_to(x, i, centroids, c);
                if (dd < best_d) {
                    best_d = dd;
                    best = static_cast<int>(c);
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }

        std::vector<std::size_t> count(k, 0);
        Matrix sums(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            count[assign[i]]++;
            for (std::size_t j = 0; j < d; ++j) sums.at(assign[i], j) += x.at(i, j);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0) {
                // Re-seed from the point farthest from its assigned centroid.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dd = sqdist_to(x, i, centroids, assign[i]);
                    if (dd > far_d) {
                        far_d = dd;
                        far = i;
                    }
                }
                std::copy(x.row(far).begin(), x.row(far).end(), centroids.row(c).begin());
                assign[far] = static_cast<int>(c);
                changed = true;
            } else {
                for (std::size_t j = 0; j < d; ++j)
                    centroids.at(c, j) = sums.at(c, j) / static_cast<double>(count[c]);
            }
        }
        if (!changed) break;
    }

    KMeansResult result;
    result.centroids = std::move(centroids);
    result.assignments = std::move(assign);
    result.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        result.inertia += sqdist_to(x, i, result.centroids, result.assignments[i]);
    return result;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, std::size_t k, std::size_t restarts, std::size_t max_iter,
                    SeededRng& rng) {
    if (k == 0) throw ConfigError("kmeans: k must be >= 1");
    if (k > x.rows())
        throw TooManyClusters("kmeans: k=" + std::to_string(k) + " exceeds n=" +
                              std::to_string(x.rows()));
    if (restarts == 0) restarts = 1;

    KMeansResult best;
    bool have = false;
    for (std::size_t r = 0; r < restarts; ++r) {
        KMeansResult cand = lloyd_once(x, k, max_iter, rng);
        if (!have || cand.inertia < best.inertia) {
            best = std::move(cand);
            have = true;
        }
    }
    return best;
}

Matrix centered_normalized_kernel(const Matrix& k) {
    return center_kernel(normalized_kernel(k));
}

SpectralEmbedding spectral_embed(const Matrix& k, std::size_t r) {
    const Matrix l = centered_normalized_kernel(k);
    auto ep = sym_eig_top_r(l, r);
    return SpectralEmbedding{std::move(ep.vectors), std::move(ep.values)};
}

}  // namespace cdknet
