#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cdknet {

// External clustering metrics plus old-class accuracies around expansion.
struct MetricsReport {
    double acc = 0.0;
    double nmi = 0.0;
    double ari = 0.0;
    double old_acc_before = 0.0;
    double old_acc_after = 0.0;
};

// Fraction of samples matched under the best injective cluster -> class
// assignment (Hungarian method on the contingency table; rectangular
// tables are padded with zero rows/columns).
double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

// Normalized mutual information I / sqrt(H_pred * H_truth), natural logs.
// Both partitions trivial (zero entropy) -> 1.0; exactly one trivial -> 0.0.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth);

// Adjusted Rand index via pair counting. A degenerate denominator (both
// partitions all-singletons or all-one-cluster) returns 1.0 when the
// partitions coincide and 0.0 otherwise.
double ari(const std::vector<int>& pred, const std::vector<int>& truth);

// Plain exact-match fraction; no assignment step.
double classification_accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

}  // namespace cdknet
