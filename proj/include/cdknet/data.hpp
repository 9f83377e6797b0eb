#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cdknet/matrix.hpp"
#include "cdknet/rng.hpp"

namespace cdknet {

struct Dataset {
    Matrix x;            // n x d0
    std::vector<int> y;  // length n, non-negative
    std::vector<std::string> class_names;  // optional

    std::size_t size() const { return x.rows(); }
    std::size_t dim() const { return x.cols(); }
    // Number of distinct label values assuming dense labels 0..C-1.
    std::size_t num_classes() const;
};

// Labeled old-class data plus unlabeled new-class data. The new-class
// ground truth lives here and is consumed by metrics only; discovery and
// network code receive d_u_x alone.
struct OpenWorldSplit {
    Dataset d_l;                 // old classes, relabeled 0..m_l-1
    Matrix d_u_x;                // new-class samples
    std::vector<int> d_u_truth;  // hidden truth, relabeled 0..m_u-1
    std::size_t m_l = 0;
    std::size_t m_u = 0;
};

// Parses the big-endian IDX pair (images magic 0x00000803, labels magic
// 0x00000801). Pixels are scaled to [0,1] by /255 and flattened row-major.
// Throws FormatError on a wrong magic, truncation, or mismatched counts.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Splits by original class label: old_classes become D_l (relabeled densely
// in sorted old-class order), everything else becomes D_u with hidden truth.
// Throws ConfigError if an old class is absent from the data, NoNewClasses
// if nothing is left over.
OpenWorldSplit make_split(const Dataset& ds, const std::vector<int>& old_classes);

enum class Warp { None, TanhMix };

// Gaussian blobs (unit within-class scale) at random centers with pairwise
// distance >= separation. Warp::TanhMix pushes all points through a fixed
// random affine -> tanh -> affine map, breaking linear structure while
// keeping the clusters intact. Throws PackingError if centers cannot be
// placed within 1000 candidate draws.
Dataset synth_blobs(std::size_t classes, std::size_t dim, std::size_t per_class,
                    double separation, Warp warp, SeededRng& rng);

// `label,f0,f1,...` rows, one per sample.
void export_csv(const Dataset& ds, const std::string& path);

}  // namespace cdknet
