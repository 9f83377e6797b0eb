#include "cdknet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdknet/errors.hpp"

namespace cdknet {

namespace {

void require_same_length(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DimensionError("label vectors must have equal length");
    if (a.empty()) throw DimensionError("label vectors must be non-empty");
    for (int v : a)
        if (v < 0) throw LabelError("labels must be non-negative");
    for (int v : b)
        if (v < 0) throw LabelError("labels must be non-negative");
}

std::vector<std::vector<long long>> contingency_table(const std::vector<int>& pred,
                                                      const std::vector<int>& truth) {
    int kp = 0, kt = 0;
    for (int v : pred) kp = std::max(kp, v + 1);
    for (int v : truth) kt = std::max(kt, v + 1);
    std::vector<std::vector<long long>> c(kp, std::vector<long long>(kt, 0));
    for (std::size_t i = 0; i < pred.size(); ++i) c[pred[i]][truth[i]]++;
    return c;
}

// Hungarian algorithm (potentials + augmenting paths) for the minimum-cost
// square assignment. O(n^3); cluster counts here are tiny.
long long min_cost_assignment(const std::vector<std::vector<long long>>& cost) {
    const std::size_t n = cost.size();
    const long long inf = std::numeric_limits<long long>::max() / 4;
    std::vector<long long> u(n + 1, 0), v(n + 1, 0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<long long> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            long long delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const long long cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    long long total = 0;
    for (std::size_t j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
    return total;
}

// Same co-clustering structure, ignoring label names.
bool partitions_equal(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> ra(a.size()), rb(b.size());
    std::vector<int> mapa, mapb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto ita = std::find(mapa.begin(), mapa.end(), a[i]);
        if (ita == mapa.end()) {
            mapa.push_back(a[i]);
            ita = std::prev(mapa.end());
        }
        ra[i] = static_cast<int>(ita - mapa.begin());
        auto itb = std::find(mapb.begin(), mapb.end(), b[i]);
        if (itb == mapb.end()) {
            mapb.push_back(b[i]);
            itb = std::prev(mapb.end());
        }
        rb[i] = static_cast<int>(itb - mapb.begin());
    }
    return ra == rb;
}

long long pairs2(long long x) { return x * (x - 1) / 2; }

}  // namespace

double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    require_same_length(pred, truth);
    const auto c = contingency_table(pred, truth);
    const std::size_t kp = c.size(), kt = c[0].size();
    const std::size_t k = std::max(kp, kt);
    long long largest = 0;
    for (const auto& row : c)
        for (long long v : row) largest = std::max(largest, v);
    // Maximize matches == minimize (largest - match) over a padded square.
    std::vector<std::vector<long long>> cost(k, std::vector<long long>(k, largest));
    for (std::size_t i = 0; i < kp; ++i)
        for (std::size_t j = 0; j < kt; ++j) cost[i][j] = largest - c[i][j];
    const long long min_cost = min_cost_assignment(cost);
    const long long matched = static_cast<long long>(k) * largest - min_cost;
    return static_cast<double>(matched) / static_cast<double>(pred.size());
}

double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
    require_same_length(pred, truth);
    const auto c = contingency_table(pred, truth);
    const double n = static_cast<double>(pred.size());
    std::vector<double> a(c.size(), 0.0), b(c[0].size(), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c[0].size(); ++j) {
            a[i] += static_cast<double>(c[i][j]);
            b[j] += static_cast<double>(c[i][j]);
        }
    double hp = 0.0, ht = 0.0, mi = 0.0;
    for (double v : a)
        if (v > 0.0) hp -= v / n * std::log(v / n);
    for (double v : b)
        if (v > 0.0) ht -= v / n * std::log(v / n);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c[0].size(); ++j)
            if (c[i][j] > 0) {
                const double pij = static_cast<double>(c[i][j]) / n;
                mi += pij * std::log(pij * n * n / (a[i] * b[j]));
            }
    if (hp <= 1e-15 && ht <= 1e-15) return 1.0;  // both single-cluster
    if (hp <= 1e-15 || ht <= 1e-15) return 0.0;
    return mi / std::sqrt(hp * ht);
}

double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
    require_same_length(pred, truth);
    if (pred.size() < 2) throw DimensionError("ari: need n >= 2");
    const auto c = contingency_table(pred, truth);
    long long index = 0, sum_a = 0, sum_b = 0;
    std::vector<long long> a(c.size(), 0), b(c[0].size(), 0);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c[0].size(); ++j) {
            index += pairs2(c[i][j]);
            a[i] += c[i][j];
            b[j] += c[i][j];
        }
    for (long long v : a) sum_a += pairs2(v);
    for (long long v : b) sum_b += pairs2(v);
    const double total = static_cast<double>(pairs2(static_cast<long long>(pred.size())));
    const double expected = static_cast<double>(sum_a) * static_cast<double>(sum_b) / total;
    const double maximum = 0.5 * static_cast<double>(sum_a + sum_b);
    const double denom = maximum - expected;
    if (std::abs(denom) < 1e-12) return partitions_equal(pred, truth) ? 1.0 : 0.0;
    return (static_cast<double>(index) - expected) / denom;
}

double classification_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    require_same_length(pred, truth);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace cdknet
