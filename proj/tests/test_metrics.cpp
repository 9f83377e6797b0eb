#include <doctest.h>

#include "cdknet/errors.hpp"
#include "cdknet/metrics.hpp"
#include "oracles.hpp"

using namespace cdknet;

namespace {

std::vector<int> random_labels(std::size_t n, int k, SeededRng& rng) {
    std::vector<int> v(n);
    for (int& x : v) x = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
    return v;
}

std::vector<int> permute_labels(const std::vector<int>& v, SeededRng& rng) {
    int top = 0;
    for (int x : v) top = std::max(top, x + 1);
    auto perm = iota_indices(static_cast<std::size_t>(top));
    rng.shuffle(perm);
    std::vector<int> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<int>(perm[v[i]]);
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("clustering accuracy basics") {
    const std::vector<int> truth = {0, 0, 1, 1};
    CHECK(clustering_accuracy(truth, truth) == 1.0);
    CHECK(clustering_accuracy({1, 1, 0, 0}, truth) == 1.0);  // pure relabeling
    CHECK(clustering_accuracy({0, 1, 0, 1}, truth) == 0.5);
    CHECK_THROWS_AS(clustering_accuracy({0, 1}, {0, 1, 1}), DimensionError);
}

TEST_CASE("clustering accuracy matches assignment enumeration") {
    SeededRng rng(8);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.index(9);
        const int kp = 1 + static_cast<int>(rng.index(4));
        const int kt = 1 + static_cast<int>(rng.index(4));
        const auto pred = random_labels(n, kp, rng);
        const auto truth = random_labels(n, kt, rng);
        CHECK(clustering_accuracy(pred, truth) ==
              doctest::Approx(oracle::acc_by_enumeration(pred, truth)).epsilon(1e-12));
    }
}

TEST_CASE("nmi basics") {
    CHECK(nmi({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(nmi({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(0.0));
    // one trivial partition
    CHECK(nmi({0, 0, 0, 0}, {0, 1, 0, 1}) == 0.0);
    // both trivial
    CHECK(nmi({2, 2, 2}, {5, 5, 5}) == 1.0);
}

TEST_CASE("nmi matches the contingency oracle and is permutation invariant") {
    SeededRng rng(15);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 3 + rng.index(20);
        const auto pred = random_labels(n, 2 + static_cast<int>(rng.index(3)), rng);
        const auto truth = random_labels(n, 2 + static_cast<int>(rng.index(3)), rng);
        const double got = nmi(pred, truth);
        CHECK(got == doctest::Approx(oracle::nmi_by_contingency(pred, truth)).epsilon(1e-12));
        CHECK(nmi(permute_labels(pred, rng), truth) == doctest::Approx(got).epsilon(1e-12));
    }
}

TEST_CASE("ari basics") {
    CHECK(ari({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
    CHECK(ari({0, 0, 0, 0}, {0, 0, 1, 1}) == doctest::Approx(0.0));
    // degenerate denominators
    CHECK(ari({0, 1, 2}, {2, 0, 1}) == 1.0);      // both all-singletons
    CHECK(ari({0, 0, 0}, {1, 1, 1}) == 1.0);      // both one-cluster
    CHECK(ari({0, 1, 2}, {0, 0, 0}) == 0.0);      // singletons vs one cluster
    CHECK_THROWS_AS(ari({0}, {0}), DimensionError);
}

TEST_CASE("ari matches pair counting exactly on small cases") {
    SeededRng rng(33);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 2 + rng.index(7);  // n <= 8
        const auto pred = random_labels(n, 1 + static_cast<int>(rng.index(4)), rng);
        const auto truth = random_labels(n, 1 + static_cast<int>(rng.index(4)), rng);
        CHECK(ari(pred, truth) ==
              doctest::Approx(oracle::ari_by_pair_counting(pred, truth)).epsilon(1e-12));
    }
}

TEST_CASE("classification accuracy") {
    CHECK(classification_accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(classification_accuracy({1, 2, 3}, {3, 1, 2}) == 0.0);
    CHECK(classification_accuracy({0, 9, 9, 9}, {0, 1, 2, 3}) == 0.25);
}

TEST_CASE("metric ranges and ACC dominance on random pairs") {
    SeededRng rng(71);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng.index(12);
        const auto pred = random_labels(n, 1 + static_cast<int>(rng.index(5)), rng);
        const auto truth = random_labels(n, 1 + static_cast<int>(rng.index(5)), rng);
        const double a = clustering_accuracy(pred, truth);
        const double m = nmi(pred, truth);
        const double r = ari(pred, truth);
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        CHECK(m >= 0.0);
        CHECK(m <= 1.0 + 1e-12);
        CHECK(r >= -0.5 - 1e-12);
        CHECK(r <= 1.0 + 1e-12);
        CHECK(a >= classification_accuracy(pred, truth));
    }
}

TEST_SUITE_END();
