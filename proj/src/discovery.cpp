#include "cdknet/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "cdknet/checkpoint.hpp"
#include "cdknet/clustering.hpp"
#include "cdknet/errors.hpp"
#include "cdknet/kernels.hpp"

namespace cdknet {

namespace {

double resolve_sigma(const Matrix& embeddings, const SigmaPolicy& policy) {
    if (policy.fixed.has_value()) {
        if (*policy.fixed <= 0.0) throw ConfigError("fixed sigma must be > 0");
        return *policy.fixed;
    }
    return median_heuristic_sigma(embeddings);
}

// Contiguous batch ranges over [0, n); a trailing singleton is merged into
// the previous batch because a kernel needs at least two points.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t start = 0;
    while (start < n) {
        std::size_t stop = std::min(n, start + batch);
        if (n - stop == 1) stop = n;
        out.emplace_back(start, stop);
        start = stop;
    }
    return out;
}

Matrix one_hot(const std::vector<int>& labels, std::size_t classes) {
    Matrix m(labels.size(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) m.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
    return m;
}

}  // namespace

Subsample subsample(const Dataset& d_l, const Matrix& d_u_x, double rate, SeededRng& rng) {
    if (!(rate > 0.0) || rate > 1.0) throw ConfigError("subsample rate must be in (0, 1]");
    const std::size_t n = d_l.size(), n_prime = d_u_x.rows();
    const std::size_t m_l = d_l.num_classes();
    const std::size_t n1 = std::max<std::size_t>(1, std::llround(rate * static_cast<double>(n)));
    const std::size_t n1p =
        std::max<std::size_t>(1, std::llround(rate * static_cast<double>(n_prime)));
    if (n1 < m_l)
        throw ConfigError("subsample: quota " + std::to_string(n1) + " cannot cover " +
                          std::to_string(m_l) + " classes; raise the rate");

    // Per-class quotas by largest remainder on rate * class_size, then a
    // minimum of one per class enforced by stealing from the largest quota.
    std::vector<std::vector<std::size_t>> by_class(m_l);
    for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(d_l.y[i])].push_back(i);
    std::vector<std::size_t> quota(m_l, 0);
    std::size_t assigned = 0;
    std::vector<std::pair<double, std::size_t>> frac;
    for (std::size_t c = 0; c < m_l; ++c) {
        const double exact = rate * static_cast<double>(by_class[c].size());
        quota[c] = std::min(by_class[c].size(), static_cast<std::size_t>(std::floor(exact)));
        assigned += quota[c];
        frac.emplace_back(exact - std::floor(exact), c);
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    while (assigned < n1) {
        bool grew = false;
        for (const auto& [rem, c] : frac) {
            if (assigned == n1) break;
            if (quota[c] < by_class[c].size()) {
                ++quota[c];
                ++assigned;
                grew = true;
            }
        }
        if (!grew) break;  // every class exhausted; n1 == n was handled above
    }
    for (std::size_t c = 0; c < m_l; ++c) {
        while (quota[c] == 0) {
            const std::size_t donor =
                std::max_element(quota.begin(), quota.end()) - quota.begin();
            if (quota[donor] <= 1) throw ConfigError("subsample: cannot cover every class");
            --quota[donor];
            ++quota[c];
        }
    }

    Subsample s;
    for (std::size_t c = 0; c < m_l; ++c) {
        auto& pool = by_class[c];
        for (std::size_t take = 0; take < quota[c]; ++take) {
            const std::size_t j = take + rng.index(pool.size() - take);
            std::swap(pool[take], pool[j]);
        }
        s.labeled_idx.insert(s.labeled_idx.end(), pool.begin(), pool.begin() + quota[c]);
    }
    std::sort(s.labeled_idx.begin(), s.labeled_idx.end());

    auto pool_u = iota_indices(n_prime);
    for (std::size_t take = 0; take < n1p; ++take) {
        const std::size_t j = take + rng.index(n_prime - take);
        std::swap(pool_u[take], pool_u[j]);
    }
    s.unlabeled_idx.assign(pool_u.begin(), pool_u.begin() + n1p);
    std::sort(s.unlabeled_idx.begin(), s.unlabeled_idx.end());

    s.n1 = s.labeled_idx.size();
    s.n1_prime = s.unlabeled_idx.size();
    s.x1 = vstack(take_rows(d_l.x, s.labeled_idx), take_rows(d_u_x, s.unlabeled_idx));
    s.y1.reserve(s.n1);
    for (std::size_t i : s.labeled_idx) s.y1.push_back(d_l.y[i]);
    return s;
}

DiscoveryState make_discovery_state(FeatureExtractor& extractor, const Dataset& d_l,
                                    const Matrix& d_u_x, std::size_t m_u,
                                    const DiscoveryConfig& cfg) {
    if (m_u == 0) throw ConfigError("discovery requires m_u >= 1");
    DiscoveryState state;
    state.extractor = &extractor;
    state.cfg = cfg;
    state.m_l = d_l.num_classes();
    state.r = state.m_l + m_u;

    SeededRng sub_rng(cfg.seed + kSubsampleSeedOffset);
    state.sample = subsample(d_l, d_u_x, cfg.subsample_rate, sub_rng);
    state.y1_onehot = one_hot(state.sample.y1, state.m_l);

    if (!cfg.lambda_infinity && cfg.epochs > 0) {
        const Matrix z1 = forward(extractor, state.sample.x1);
        const double sigma = resolve_sigma(z1, cfg.sigma);
        const Matrix k = kernel_matrix(z1, KernelSpec::gaussian(sigma));
        auto embedding = spectral_embed(k, state.r);
        state.u = std::move(embedding.u);
        state.u_eigenvalues = std::move(embedding.eigenvalues);
    }
    return state;
}

double objective(const DiscoveryState& state) {
    const FeatureExtractor& extractor = *state.extractor;
    const Matrix z1 = forward(extractor, state.sample.x1);

    double supervised = 0.0;
    if (state.sample.n1 >= 2) {
        auto labeled_rows = iota_indices(state.sample.n1);
        const Matrix zl = take_rows(z1, labeled_rows);
        const double sigma_l = resolve_sigma(zl, state.cfg.sigma);
        const Matrix kl = kernel_matrix(zl, KernelSpec::gaussian(sigma_l));
        const Matrix ky = matmul(state.y1_onehot, transpose(state.y1_onehot));
        supervised = hsic(kl, ky);
    }
    if (state.cfg.lambda_infinity) return supervised;

    const double sigma = resolve_sigma(z1, state.cfg.sigma);
    const Matrix k = kernel_matrix(z1, KernelSpec::gaussian(sigma));
    const Matrix ku = matmul(state.u, transpose(state.u));
    const double unsupervised = hsic(normalized_kernel(k), ku);
    return unsupervised + state.cfg.lambda * supervised;
}

void update_theta_epoch(DiscoveryState& state, SeededRng& batch_rng) {
    FeatureExtractor& extractor = *state.extractor;
    const DiscoveryConfig& cfg = state.cfg;
    const Subsample& sample = state.sample;
    const std::size_t total = sample.n1 + sample.n1_prime;

    std::size_t batch = cfg.batch_size;
    if (batch > total) {
        batch = total;
        state.batch_clamped = true;
    }
    if (batch < 2) batch = 2;

    auto order = iota_indices(total);
    batch_rng.shuffle(order);
    auto labeled_order = iota_indices(sample.n1);
    batch_rng.shuffle(labeled_order);
    std::size_t labeled_pos = 0;
    const std::size_t labeled_batch = std::min(batch, sample.n1);
    const bool supervised_steps = cfg.lambda_infinity || cfg.lambda > 0.0;
    const double supervised_lr =
        cfg.lambda_infinity ? cfg.learning_rate : cfg.lambda * cfg.learning_rate;

    for (const auto& [lo, hi] : batch_ranges(total, batch)) {
        if (!cfg.lambda_infinity) {
            const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
            const Matrix xb = take_rows(sample.x1, idx);
            const Matrix ub = take_rows(state.u, idx);
            const Matrix zb = forward(extractor, xb);
            const double sigma = resolve_sigma(zb, cfg.sigma);
            const Matrix grad = hsic_grad_wrt_embedding(
                zb, matmul(ub, transpose(ub)), KernelSpec::gaussian(sigma), true);
            apply_embedding_gradient(extractor, xb, grad, cfg.learning_rate,
                                     GradientSign::Ascent);
        }

        if (supervised_steps && sample.n1 >= 2 && labeled_batch >= 2) {
            if (labeled_pos + labeled_batch > sample.n1) {
                batch_rng.shuffle(labeled_order);
                labeled_pos = 0;
            }
            const std::span<const std::size_t> idx(labeled_order.data() + labeled_pos,
                                                   labeled_batch);
            labeled_pos += labeled_batch;
            const Matrix xb = take_rows(sample.x1, idx);  // labeled block occupies rows [0, n1)
            const Matrix yb = take_rows(state.y1_onehot, idx);
            const Matrix zb = forward(extractor, xb);
            const double sigma = resolve_sigma(zb, cfg.sigma);
            const Matrix grad = hsic_grad_wrt_embedding(
                zb, matmul(yb, transpose(yb)), KernelSpec::gaussian(sigma), false);
            apply_embedding_gradient(extractor, xb, grad, supervised_lr, GradientSign::Ascent);
        }
    }
}

void update_u(DiscoveryState& state) {
    const Matrix z1 = forward(*state.extractor, state.sample.x1);
    const double sigma = resolve_sigma(z1, state.cfg.sigma);
    const Matrix k = kernel_matrix(z1, KernelSpec::gaussian(sigma));
    auto embedding = spectral_embed(k, state.r);
    state.u = std::move(embedding.u);
    state.u_eigenvalues = std::move(embedding.eigenvalues);
}

DiscoveryState run_cdknet(FeatureExtractor& extractor, const Dataset& d_l, const Matrix& d_u_x,
                          std::size_t m_u, const DiscoveryConfig& cfg) {
    DiscoveryState state = make_discovery_state(extractor, d_l, d_u_x, m_u, cfg);
    SeededRng batch_rng(cfg.seed + kBatchSeedOffset);

    if (cfg.epochs > 0) {
        state.objective_history.emplace_back(0, objective(state));
        for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
            update_theta_epoch(state, batch_rng);
            if (!cfg.lambda_infinity) update_u(state);
            state.objective_history.emplace_back(epoch, objective(state));
        }
    }

    SeededRng pseudo_rng(cfg.seed + kPseudoLabelSeedOffset);
    state.pseudo_labels =
        baseline_sscd(extractor, d_u_x, m_u, pseudo_rng, cfg.kmeans_restarts);
    return state;
}

std::vector<int> baseline_sscd(const FeatureExtractor& extractor, const Matrix& d_u_x,
                               std::size_t m_u, SeededRng& rng, std::size_t restarts) {
    const Matrix embeddings = forward(extractor, d_u_x);
    return kmeans(embeddings, m_u, restarts, 300, rng).assignments;
}

std::vector<int> predictions_to_clusters(const std::vector<int>& pred, std::size_t m_l,
                                         std::size_t m_u) {
    std::vector<int> out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i];
        out[i] = p >= static_cast<int>(m_l) ? p - static_cast<int>(m_l)
                                            : static_cast<int>(m_u) + p;
    }
    return out;
}

Stage3Outcome run_stage3(const Dataset& d_l, const Matrix& d_u_x,
                         const std::vector<int>& pseudo_labels,
                         const FeatureExtractor& refined, const ClassifierHead& head,
                         std::size_t m_u, const Stage3Config& cfg) {
    if (cfg.strategy == ExpansionStrategy::None)
        throw ConfigError("run_stage3: strategy None skips this stage");
    if (pseudo_labels.size() != d_u_x.rows())
        throw DimensionError("run_stage3: pseudo-label count must match D_u");

    SeededRng rng(cfg.train.seed);
    ExpansionResult exp;
    switch (cfg.strategy) {
        case ExpansionStrategy::LastTwo:
            exp = expand(refined, head, m_u, cfg.penultimate_frac, rng);
            break;
        case ExpansionStrategy::LastOnly:
            exp = expand(refined, head, m_u, 0.0, rng);
            break;
        case ExpansionStrategy::AllLayers:
            exp = expand_all_layers(refined, head, m_u, cfg.penultimate_frac, rng);
            break;
        case ExpansionStrategy::None:
            break;
    }

    // Fine-tuning mix: all of D_u under pseudo-labels shifted past the old
    // classes, plus old_fraction of D_l under its true labels.
    const std::size_t m_l = head.classes();
    const std::size_t n_old = static_cast<std::size_t>(
        std::llround(cfg.old_fraction * static_cast<double>(d_l.size())));
    auto old_pool = iota_indices(d_l.size());
    for (std::size_t take = 0; take < n_old; ++take) {
        const std::size_t j = take + rng.index(old_pool.size() - take);
        std::swap(old_pool[take], old_pool[j]);
    }
    std::vector<std::size_t> old_take(old_pool.begin(), old_pool.begin() + n_old);
    std::sort(old_take.begin(), old_take.end());

    Dataset mix;
    std::vector<int> mix_labels;
    mix_labels.reserve(pseudo_labels.size() + old_take.size());
    for (int pl : pseudo_labels) mix_labels.push_back(static_cast<int>(m_l) + pl);
    if (!old_take.empty()) {
        mix.x = vstack(d_u_x, take_rows(d_l.x, old_take));
        for (std::size_t i : old_take) mix_labels.push_back(d_l.y[i]);
    } else {
        mix.x = d_u_x;
    }
    mix.y = std::move(mix_labels);

    Stage3Outcome out;
    out.log = finetune_expanded(exp.extractor, exp.head, mix, cfg.train,
                                cfg.backbone_lr_factor);
    out.extractor = std::move(exp.extractor);
    out.head = std::move(exp.head);
    out.added_penultimate_units = exp.added_penultimate_units;
    return out;
}

PipelineOutcome run_full_pipeline(const OpenWorldSplit& split, const PipelineConfig& cfg,
                                  const StageCallback& on_stage) {
    auto stage = [&on_stage](const char* name) {
        if (on_stage) on_stage(name);
    };
    PipelineOutcome out;

    stage("stage1-pretrain");
    SeededRng init_rng(cfg.stage1.seed);
    std::vector<LayerSpec> specs;
    std::size_t prev = split.d_l.dim();
    for (std::size_t width : cfg.shape.hidden) {
        specs.push_back({prev, width, Activation::ReLU});
        prev = width;
    }
    specs.push_back({prev, cfg.shape.latent_dim, Activation::Identity});
    FeatureExtractor extractor = make_extractor(specs, init_rng);
    ClassifierHead head = make_head(cfg.shape.latent_dim, split.m_l, init_rng);
    out.stage1_log = pretrain(extractor, head, split.d_l, cfg.stage1);
    out.pretrained_extractor = extractor;
    out.pretrained_head = head;
    const std::vector<int> old_before = predict(extractor, head, split.d_l.x);
    out.report.old_acc_before = classification_accuracy(old_before, split.d_l.y);

    stage("stage2-discovery");
    out.state = run_cdknet(extractor, split.d_l, split.d_u_x, split.m_u, cfg.stage2);
    out.cluster_acc = clustering_accuracy(out.state.pseudo_labels, split.d_u_truth);
    out.cluster_nmi = nmi(out.state.pseudo_labels, split.d_u_truth);
    out.cluster_ari = ari(out.state.pseudo_labels, split.d_u_truth);
    out.refined_extractor = extractor;
    out.refined_head = head;

    if (cfg.stage3.strategy == ExpansionStrategy::None) {
        // No expansion: pseudo-labels are the final discovery output.
        out.report.acc = out.cluster_acc;
        out.report.nmi = out.cluster_nmi;
        out.report.ari = out.cluster_ari;
        out.report.old_acc_after = out.report.old_acc_before;
        out.expanded_extractor = extractor;
        out.expanded_head = head;
        out.state.extractor = nullptr;
        return out;
    }

    stage("stage3-expansion");
    Stage3Outcome st3 = run_stage3(split.d_l, split.d_u_x, out.state.pseudo_labels, extractor,
                                   head, split.m_u, cfg.stage3);
    out.stage3_log = std::move(st3.log);

    stage("evaluate");
    const std::vector<int> pred_u = predict(st3.extractor, st3.head, split.d_u_x);
    const std::vector<int> clusters = predictions_to_clusters(pred_u, split.m_l, split.m_u);
    out.report.acc = clustering_accuracy(clusters, split.d_u_truth);
    out.report.nmi = nmi(clusters, split.d_u_truth);
    out.report.ari = ari(clusters, split.d_u_truth);
    const std::vector<int> old_after = predict(st3.extractor, st3.head, split.d_l.x);
    out.report.old_acc_after = classification_accuracy(old_after, split.d_l.y);

    out.expanded_extractor = std::move(st3.extractor);
    out.expanded_head = std::move(st3.head);
    // The state's extractor pointer referenced a local; the refined network
    // lives on as refined_extractor, so drop the pointer rather than dangle.
    out.state.extractor = nullptr;
    return out;
}

void write_pseudo_labels_csv(const std::vector<int>& labels, const std::string& path) {
    std::string body = "index,pseudo_label\n";
    char buf[64];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%d\n", i, labels[i]);
        body += buf;
    }
    atomic_write_text(path, body);
}

void write_objective_history_csv(const std::vector<std::pair<std::size_t, double>>& history,
                                 const std::string& path) {
    std::string body = "epoch,objective\n";
    char buf[80];
    for (const auto& [epoch, value] : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", epoch, value);
        body += buf;
    }
    atomic_write_text(path, body);
}

}  // namespace cdknet
