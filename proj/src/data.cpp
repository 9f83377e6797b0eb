#include "cdknet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>

#include "cdknet/errors.hpp"

namespace cdknet {

std::size_t Dataset::num_classes() const {
    int top = -1;
    for (int v : y) top = std::max(top, v);
    return static_cast<std::size_t>(top + 1);
}

namespace {

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("truncated IDX file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("cannot open IDX image file: " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("cannot open IDX label file: " + labels_path);

    const std::uint32_t img_magic = read_be_u32(img, images_path);
    if (img_magic != 0x00000803)
        throw FormatError("bad IDX image magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%08x", img_magic);
            return std::string(buf);
        }() + " in " + images_path);
    const std::uint32_t n_img = read_be_u32(img, images_path);
    const std::uint32_t rows = read_be_u32(img, images_path);
    const std::uint32_t cols = read_be_u32(img, images_path);

    const std::uint32_t lab_magic = read_be_u32(lab, labels_path);
    if (lab_magic != 0x00000801)
        throw FormatError("bad IDX label magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%08x", lab_magic);
            return std::string(buf);
        }() + " in " + labels_path);
    const std::uint32_t n_lab = read_be_u32(lab, labels_path);

    if (n_img != n_lab)
        throw FormatError("IDX count mismatch: " + std::to_string(n_img) + " images vs " +
                          std::to_string(n_lab) + " labels");
    if (n_img == 0) throw FormatError("IDX files contain no samples");

    const std::size_t d0 = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> pix(d0);
    Matrix x(n_img, d0);
    std::vector<int> y(n_img);
    for (std::uint32_t i = 0; i < n_img; ++i) {
        if (!img.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(d0)))
            throw FormatError("truncated IDX file: " + images_path);
        auto row = x.row(i);
        for (std::size_t j = 0; j < d0; ++j) row[j] = static_cast<double>(pix[j]) / 255.0;
        char lb;
        if (!lab.read(&lb, 1)) throw FormatError("truncated IDX file: " + labels_path);
        y[i] = static_cast<int>(static_cast<unsigned char>(lb));
    }
    return Dataset{std::move(x), std::move(y), {}};
}

OpenWorldSplit make_split(const Dataset& ds, const std::vector<int>& old_classes) {
    if (old_classes.empty()) throw ConfigError("make_split: old_classes must be non-empty");
    std::set<int> observed(ds.y.begin(), ds.y.end());
    std::set<int> old_set(old_classes.begin(), old_classes.end());
    for (int c : old_set)
        if (!observed.count(c))
            throw ConfigError("make_split: class " + std::to_string(c) + " not present in data");

    std::vector<int> new_classes;
    for (int c : observed)
        if (!old_set.count(c)) new_classes.push_back(c);
    if (new_classes.empty())
        throw NoNewClasses("make_split: old_classes covers every observed class");

    // Dense relabeling in sorted original-label order.
    std::vector<int> old_sorted(old_set.begin(), old_set.end());
    auto dense_old = [&](int c) {
        return static_cast<int>(std::lower_bound(old_sorted.begin(), old_sorted.end(), c) -
                                old_sorted.begin());
    };
    auto dense_new = [&](int c) {
        return static_cast<int>(std::lower_bound(new_classes.begin(), new_classes.end(), c) -
                                new_classes.begin());
    };

    std::vector<std::size_t> idx_old, idx_new;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (old_set.count(ds.y[i]) ? idx_old : idx_new).push_back(i);

    OpenWorldSplit split;
    split.m_l = old_sorted.size();
    split.m_u = new_classes.size();
    split.d_l.x = take_rows(ds.x, idx_old);
    split.d_l.y.reserve(idx_old.size());
    for (std::size_t i : idx_old) split.d_l.y.push_back(dense_old(ds.y[i]));
    split.d_u_x = take_rows(ds.x, idx_new);
    split.d_u_truth.reserve(idx_new.size());
    for (std::size_t i : idx_new) split.d_u_truth.push_back(dense_new(ds.y[i]));
    return split;
}

Dataset synth_blobs(std::size_t classes, std::size_t dim, std::size_t per_class,
                    double separation, Warp warp, SeededRng& rng) {
    if (classes == 0 || dim == 0 || per_class == 0)
        throw ConfigError("synth_blobs: counts must be >= 1");
    if (separation <= 0.0) throw ConfigError("synth_blobs: separation must be > 0");

    // Center placement by rejection inside a box sized for easy packing.
    const double box = 2.0 * separation * std::pow(static_cast<double>(classes), 1.0 / dim);
    Matrix centers(classes, dim);
    std::size_t placed = 0, draws = 0;
    while (placed < classes) {
        if (++draws > 1000)
            throw PackingError("synth_blobs: failed to place separated centers in 1000 draws");
        std::vector<double> cand(dim);
        for (double& v : cand) v = rng.uniform(-box, box);
        bool ok = true;
        for (std::size_t c = 0; c < placed && ok; ++c) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = cand[j] - centers.at(c, j);
                d2 += d * d;
            }
            ok = d2 >= separation * separation;
        }
        if (ok) {
            std::copy(cand.begin(), cand.end(), centers.row(placed).begin());
            ++placed;
        }
    }

    const std::size_t n = classes * per_class;
    Matrix x(n, dim);
    std::vector<int> y(n);
    std::size_t row = 0;
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t s = 0; s < per_class; ++s, ++row) {
            y[row] = static_cast<int>(c);
            for (std::size_t j = 0; j < dim; ++j)
                x.at(row, j) = centers.at(c, j) + rng.normal();
        }

    if (warp == Warp::TanhMix) {
        // Fixed random affine -> tanh -> affine. The pre-tanh scale keeps
        // points in the curved region rather than deep saturation, so
        // clusters stay apart while linear structure breaks.
        Matrix a1(dim, dim), a2(dim, dim);
        std::vector<double> b1(dim);
        const double col_scale = 1.0 / std::sqrt(static_cast<double>(dim));
        for (double& v : a1.data()) v = rng.normal() * col_scale;
        for (double& v : a2.data()) v = rng.normal() * col_scale;
        for (double& v : b1) v = rng.normal() * 0.5;
        const double pre_scale = 1.0 / (2.0 * separation);

        Matrix warped(n, dim);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> h(dim, 0.0);
            for (std::size_t j = 0; j < dim; ++j) {
                double s = b1[j];
                for (std::size_t k = 0; k < dim; ++k) s += a1.at(j, k) * x.at(i, k) * pre_scale;
                h[j] = std::tanh(s);
            }
            for (std::size_t j = 0; j < dim; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < dim; ++k) s += a2.at(j, k) * h[k];
                // Rescale to roughly the original data magnitude.
                warped.at(i, j) = s * separation;
            }
        }
        x = std::move(warped);
    }

    return Dataset{std::move(x), std::move(y), {}};
}

void export_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "label";
    for (std::size_t j = 0; j < ds.dim(); ++j) out << ",f" << j;
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.y[i];
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.x.at(i, j));
            out << ',' << buf;
        }
        out << "\n";
    }
}

}  // namespace cdknet
