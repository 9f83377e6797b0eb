#include "cdknet/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdknet/errors.hpp"

namespace cdknet {

namespace {

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Matrix glorot_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
    const double b = glorot_bound(rows, cols);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-b, b);
    return m;
}

Matrix apply_activation(const Matrix& pre, Activation act) {
    if (act == Activation::Identity) return pre;
    Matrix out = pre;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

// Forward pass keeping every layer input; post[l] feeds layer l,
// post.back() is the latent embedding.
struct ForwardCache {
    std::vector<Matrix> post;  // size layers+1
    std::vector<Matrix> pre;   // size layers
};

ForwardCache forward_cached(const FeatureExtractor& extractor, const Matrix& x) {
    if (x.cols() != extractor.input_dim())
        throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                             " columns, extractor expects " +
                             std::to_string(extractor.input_dim()));
    ForwardCache cache;
    cache.post.push_back(x);
    for (const Layer& layer : extractor.layers) {
        Matrix pre = matmul(cache.post.back(), layer.weight);
        for (std::size_t i = 0; i < pre.rows(); ++i) {
            auto row = pre.row(i);
            for (std::size_t j = 0; j < pre.cols(); ++j) row[j] += layer.bias[j];
        }
        cache.post.push_back(apply_activation(pre, layer.spec.activation));
        cache.pre.push_back(std::move(pre));
    }
    return cache;
}

// Pulls a gradient w.r.t. the extractor output back through the layers.
void backprop_layers(const FeatureExtractor& extractor, const ForwardCache& cache, Matrix d_z,
                     ParamGradients& out) {
    const std::size_t n_layers = extractor.layers.size();
    out.layer_weight.resize(n_layers);
    out.layer_bias.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        const Layer& layer = extractor.layers[l];
        Matrix d_pre = std::move(d_z);
        if (layer.spec.activation == Activation::ReLU) {
            for (std::size_t i = 0; i < d_pre.size(); ++i)
                if (cache.pre[l].data()[i] <= 0.0) d_pre.data()[i] = 0.0;
        }
        out.layer_weight[l] = matmul(transpose(cache.post[l]), d_pre);
        out.layer_bias[l].assign(layer.spec.output_dim, 0.0);
        for (std::size_t i = 0; i < d_pre.rows(); ++i) {
            auto row = d_pre.row(i);
            for (std::size_t j = 0; j < d_pre.cols(); ++j) out.layer_bias[l][j] += row[j];
        }
        if (l > 0) d_z = matmul(d_pre, transpose(layer.weight));
    }
}

void validate_labels(const std::vector<int>& y, std::size_t classes) {
    for (int v : y)
        if (v < 0 || static_cast<std::size_t>(v) >= classes)
            throw LabelError("label " + std::to_string(v) + " outside [0, " +
                             std::to_string(classes) + ")");
}

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

struct ParamSlots {
    std::vector<Matrix> layer_weight;
    std::vector<std::vector<double>> layer_bias;
    Matrix head_weight;
    std::vector<double> head_bias;
};

ParamSlots zeros_like(const FeatureExtractor& extractor, const ClassifierHead& head) {
    ParamSlots s;
    for (const Layer& layer : extractor.layers) {
        s.layer_weight.emplace_back(layer.weight.rows(), layer.weight.cols());
        s.layer_bias.emplace_back(layer.bias.size(), 0.0);
    }
    s.head_weight = Matrix(head.weight.rows(), head.weight.cols());
    s.head_bias.assign(head.bias.size(), 0.0);
    return s;
}

class Optimizer {
public:
    Optimizer(OptimizerKind kind, const FeatureExtractor& extractor, const ClassifierHead& head)
        : kind_(kind), momentum_(zeros_like(extractor, head)) {
        if (kind_ == OptimizerKind::Adam) second_ = zeros_like(extractor, head);
    }

    // Descent step; lr_layers[l] applies to extractor layer l, lr_head to the head.
    void step(FeatureExtractor& extractor, ClassifierHead& head, const ParamGradients& g,
              const std::vector<double>& lr_layers, double lr_head) {
        ++t_;
        for (std::size_t l = 0; l < extractor.layers.size(); ++l) {
            update(extractor.layers[l].weight.data(), g.layer_weight[l].data(),
                   momentum_.layer_weight[l].data(), adam_second(&ParamSlots::layer_weight, l),
                   lr_layers[l]);
            update(extractor.layers[l].bias, g.layer_bias[l], momentum_.layer_bias[l],
                   adam_second(&ParamSlots::layer_bias, l), lr_layers[l]);
        }
        if (g.head_weight.size() > 0) {
            update(head.weight.data(), g.head_weight.data(), momentum_.head_weight.data(),
                   kind_ == OptimizerKind::Adam ? &second_.head_weight.data() : nullptr, lr_head);
            update(head.bias, g.head_bias, momentum_.head_bias,
                   kind_ == OptimizerKind::Adam ? &second_.head_bias : nullptr, lr_head);
        }
    }

private:
    template <typename Member>
    std::vector<double>* adam_second(Member member, std::size_t l) {
        if (kind_ != OptimizerKind::Adam) return nullptr;
        auto& slot = second_.*member;
        if constexpr (std::is_same_v<std::decay_t<decltype(slot[l])>, Matrix>)
            return &slot[l].data();
        else
            return &slot[l];
    }

    void update(std::vector<double>& param, const std::vector<double>& grad,
                std::vector<double>& vel, std::vector<double>* sq, double lr) {
        if (lr == 0.0 && kind_ == OptimizerKind::SgdMomentum) return;  // frozen exactly
        if (kind_ == OptimizerKind::SgdMomentum) {
            for (std::size_t i = 0; i < param.size(); ++i) {
                vel[i] = 0.9 * vel[i] + grad[i];
                param[i] -= lr * vel[i];
            }
        } else {
            constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
            for (std::size_t i = 0; i < param.size(); ++i) {
                vel[i] = b1 * vel[i] + (1.0 - b1) * grad[i];
                (*sq)[i] = b2 * (*sq)[i] + (1.0 - b2) * grad[i] * grad[i];
                param[i] -= lr * (vel[i] / c1) / (std::sqrt((*sq)[i] / c2) + eps);
            }
        }
    }

    OptimizerKind kind_;
    ParamSlots momentum_;
    ParamSlots second_;
    std::size_t t_ = 0;
};

// Shared minibatch cross-entropy loop for pretrain and finetune.
TrainingLog train_cross_entropy(FeatureExtractor& extractor, ClassifierHead& head,
                                const Dataset& ds, const TrainConfig& cfg,
                                double backbone_lr_factor) {
    if (ds.size() == 0) throw EmptyInput("training requires a non-empty dataset");
    validate_labels(ds.y, head.classes());
    validate_train_config(cfg);

    std::vector<double> lr_layers(extractor.layers.size(), cfg.learning_rate);
    for (std::size_t l = 0; l + 1 < lr_layers.size(); ++l)
        lr_layers[l] = cfg.learning_rate * backbone_lr_factor;
    if (backbone_lr_factor != 1.0 && lr_layers.size() == 1)
        lr_layers[0] = cfg.learning_rate;  // single layer == the penultimate layer

    Optimizer opt(cfg.optimizer, extractor, head);
    SeededRng rng(cfg.seed);
    TrainingLog log;

    const std::size_t n = ds.size();
    const std::size_t batch = std::min(cfg.batch_size, n);
    auto order = iota_indices(n);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            const std::span<const std::size_t> idx(order.data() + start, stop - start);
            const Matrix xb = take_rows(ds.x, idx);
            std::vector<int> yb(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = ds.y[idx[i]];
            const ParamGradients g = cross_entropy_gradients(extractor, head, xb, yb);
            opt.step(extractor, head, g, lr_layers, cfg.learning_rate);
            loss_sum += g.loss;
            ++batches;
        }
        log.epochs.push_back({epoch, loss_sum / static_cast<double>(batches)});
    }

    const std::vector<int> pred = predict(extractor, head, ds.x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += pred[i] == ds.y[i];
    log.final_accuracy = static_cast<double>(hits) / static_cast<double>(n);
    return log;
}

}  // namespace

FeatureExtractor make_extractor(const std::vector<LayerSpec>& specs, SeededRng& rng) {
    if (specs.empty()) throw ConfigError("extractor needs at least one layer");
    FeatureExtractor fe;
    for (std::size_t l = 0; l < specs.size(); ++l) {
        const LayerSpec& s = specs[l];
        if (s.input_dim == 0 || s.output_dim == 0)
            throw DimensionError("layer dimensions must be >= 1");
        if (l > 0 && s.input_dim != specs[l - 1].output_dim)
            throw DimensionError("layer " + std::to_string(l) + " input does not chain");
        fe.layers.push_back({s, glorot_matrix(s.input_dim, s.output_dim, rng),
                             std::vector<double>(s.output_dim, 0.0)});
    }
    return fe;
}

ClassifierHead make_head(std::size_t latent_dim, std::size_t classes, SeededRng& rng) {
    if (classes == 0) throw ConfigError("head needs at least one class");
    return {glorot_matrix(latent_dim, classes, rng), std::vector<double>(classes, 0.0)};
}

Matrix forward(const FeatureExtractor& extractor, const Matrix& x) {
    return forward_cached(extractor, x).post.back();
}

Matrix logits(const FeatureExtractor& extractor, const ClassifierHead& head, const Matrix& x) {
    Matrix z = forward(extractor, x);
    if (z.cols() != head.weight.rows())
        throw DimensionError("head expects latent dim " + std::to_string(head.weight.rows()));
    Matrix out = matmul(z, head.weight);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        for (std::size_t j = 0; j < out.cols(); ++j) row[j] += head.bias[j];
    }
    return out;
}

Matrix softmax_rows(const Matrix& logit_matrix) {
    Matrix p = logit_matrix;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        auto row = p.row(i);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
    return p;
}

std::vector<int> predict(const FeatureExtractor& extractor, const ClassifierHead& head,
                         const Matrix& x) {
    const Matrix lg = logits(extractor, head, x);
    std::vector<int> out(lg.rows());
    for (std::size_t i = 0; i < lg.rows(); ++i) {
        auto row = lg.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j)
            if (row[j] > row[best]) best = j;  // strict: ties keep the lowest index
        out[i] = static_cast<int>(best);
    }
    return out;
}

ParamGradients cross_entropy_gradients(const FeatureExtractor& extractor,
                                       const ClassifierHead& head, const Matrix& x,
                                       const std::vector<int>& y) {
    if (y.size() != x.rows()) throw DimensionError("labels must match batch rows");
    validate_labels(y, head.classes());
    const ForwardCache cache = forward_cached(extractor, x);
    const Matrix& z = cache.post.back();

    Matrix lg = matmul(z, head.weight);
    for (std::size_t i = 0; i < lg.rows(); ++i) {
        auto row = lg.row(i);
        for (std::size_t j = 0; j < lg.cols(); ++j) row[j] += head.bias[j];
    }

    const std::size_t n = x.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix d_logits = softmax_rows(lg);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // Stable -log softmax[y_i] via logsumexp.
        auto row = lg.row(i);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double lse = 0.0;
        for (double v : row) lse += std::exp(v - mx);
        loss += -(row[y[i]] - mx - std::log(lse));
        d_logits.at(i, y[i]) -= 1.0;
    }
    for (double& v : d_logits.data()) v *= inv_n;

    ParamGradients g;
    g.loss = loss * inv_n;
    g.head_weight = matmul(transpose(z), d_logits);
    g.head_bias.assign(head.classes(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < head.classes(); ++j) g.head_bias[j] += d_logits.at(i, j);
    backprop_layers(extractor, cache, matmul(d_logits, transpose(head.weight)), g);
    return g;
}

ParamGradients embedding_gradients(const FeatureExtractor& extractor, const Matrix& x,
                                   const Matrix& d_loss_d_embedding) {
    const ForwardCache cache = forward_cached(extractor, x);
    if (d_loss_d_embedding.rows() != x.rows() ||
        d_loss_d_embedding.cols() != extractor.latent_dim())
        throw DimensionError("embedding gradient must be batch x latent_dim");
    ParamGradients g;
    backprop_layers(extractor, cache, d_loss_d_embedding, g);
    return g;
}

void apply_embedding_gradient(FeatureExtractor& extractor, const Matrix& x_batch,
                              const Matrix& d_loss_d_embedding, double lr, GradientSign sign) {
    const ParamGradients g = embedding_gradients(extractor, x_batch, d_loss_d_embedding);
    const double step = sign == GradientSign::Ascent ? lr : -lr;
    for (std::size_t l = 0; l < extractor.layers.size(); ++l) {
        Layer& layer = extractor.layers[l];
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] += step * g.layer_weight[l].data()[i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            layer.bias[i] += step * g.layer_bias[l][i];
    }
}

TrainingLog pretrain(FeatureExtractor& extractor, ClassifierHead& head, const Dataset& d_l,
                     const TrainConfig& cfg) {
    return train_cross_entropy(extractor, head, d_l, cfg, 1.0);
}

ExpansionResult expand(const FeatureExtractor& extractor, const ClassifierHead& head,
                       std::size_t m_u, double penultimate_frac, SeededRng& rng) {
    if (penultimate_frac < 0.0) throw ConfigError("penultimate_frac must be >= 0");
    const std::size_t d = extractor.latent_dim();
    const std::size_t e =
        static_cast<std::size_t>(std::ceil(penultimate_frac * static_cast<double>(d)));

    ExpansionResult result;
    result.extractor = extractor;
    result.head = head;
    result.added_penultimate_units = e;
    if (m_u == 0 && e == 0) {
        result.no_op = true;
        return result;
    }

    const std::size_t m = head.classes();
    if (e > 0) {
        Layer& last = result.extractor.layers.back();
        const std::size_t in_p = last.spec.input_dim;
        Matrix grown(in_p, d + e);
        const double bound = glorot_bound(in_p, d + e);
        for (std::size_t i = 0; i < in_p; ++i) {
            for (std::size_t j = 0; j < d; ++j) grown.at(i, j) = last.weight.at(i, j);
            for (std::size_t j = d; j < d + e; ++j) grown.at(i, j) = rng.uniform(-bound, bound);
        }
        last.weight = std::move(grown);
        last.bias.resize(d + e, 0.0);
        last.spec.output_dim = d + e;
    }

    Matrix head_w(d + e, m + m_u);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < m; ++j) head_w.at(i, j) = head.weight.at(i, j);
    // New penultimate units feed the old outputs with exact zeros, so the
    // old-class logits cannot move at the expansion instant.
    const double bound = glorot_bound(d + e, m + m_u);
    for (std::size_t i = 0; i < d + e; ++i)
        for (std::size_t j = m; j < m + m_u; ++j) head_w.at(i, j) = rng.uniform(-bound, bound);
    result.head.weight = std::move(head_w);
    result.head.bias.resize(m + m_u, 0.0);
    return result;
}

ExpansionResult expand_all_layers(const FeatureExtractor& extractor, const ClassifierHead& head,
                                  std::size_t m_u, double frac, SeededRng& rng) {
    if (frac < 0.0) throw ConfigError("frac must be >= 0");
    ExpansionResult result;
    result.extractor = extractor;
    result.head = head;

    std::size_t prev_added = 0;
    for (Layer& layer : result.extractor.layers) {
        const std::size_t in_old = layer.spec.input_dim, out_old = layer.spec.output_dim;
        const std::size_t add =
            static_cast<std::size_t>(std::ceil(frac * static_cast<double>(out_old)));
        Matrix grown(in_old + prev_added, out_old + add);
        const double bound = glorot_bound(in_old + prev_added, out_old + add);
        for (std::size_t i = 0; i < in_old + prev_added; ++i)
            for (std::size_t j = 0; j < out_old + add; ++j) {
                if (i < in_old && j < out_old)
                    grown.at(i, j) = layer.weight.at(i, j);
                else if (i >= in_old && j < out_old)
                    grown.at(i, j) = 0.0;  // new inputs must not disturb old units
                else
                    grown.at(i, j) = rng.uniform(-bound, bound);
            }
        layer.weight = std::move(grown);
        layer.bias.resize(out_old + add, 0.0);
        layer.spec.input_dim = in_old + prev_added;
        layer.spec.output_dim = out_old + add;
        prev_added = add;
    }
    result.added_penultimate_units = prev_added;

    const std::size_t d_old = head.weight.rows(), m = head.classes();
    Matrix head_w(d_old + prev_added, m + m_u);
    const double bound = glorot_bound(d_old + prev_added, m + m_u);
    for (std::size_t i = 0; i < d_old + prev_added; ++i)
        for (std::size_t j = 0; j < m + m_u; ++j) {
            if (i < d_old && j < m)
                head_w.at(i, j) = head.weight.at(i, j);
            else if (i >= d_old && j < m)
                head_w.at(i, j) = 0.0;
            else
                head_w.at(i, j) = rng.uniform(-bound, bound);
        }
    result.head.weight = std::move(head_w);
    result.head.bias.resize(m + m_u, 0.0);
    result.no_op = m_u == 0 && prev_added == 0;
    return result;
}

TrainingLog finetune_expanded(FeatureExtractor& extractor, ClassifierHead& head,
                              const Dataset& d_mix, const TrainConfig& cfg,
                              double backbone_lr_factor) {
    if (backbone_lr_factor < 0.0) throw ConfigError("backbone_lr_factor must be >= 0");
    return train_cross_entropy(extractor, head, d_mix, cfg, backbone_lr_factor);
}

}  // namespace cdknet
