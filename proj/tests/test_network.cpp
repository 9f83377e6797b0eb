#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cdknet/errors.hpp"
#include "cdknet/kernels.hpp"
#include "cdknet/network.hpp"
#include "oracles.hpp"

using namespace cdknet;

namespace {

FeatureExtractor tiny_net(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    SeededRng rng(seed);
    return make_extractor(specs, rng);
}

// Finite differences are only a valid derivative oracle away from the ReLU
// kink; true when every pre-activation is safely nonzero at this input.
bool kink_safe(const FeatureExtractor& extractor, const Matrix& x, double margin = 1e-4) {
    Matrix z = x;
    for (const Layer& layer : extractor.layers) {
        Matrix pre = matmul(z, layer.weight);
        for (std::size_t i = 0; i < pre.rows(); ++i)
            for (std::size_t j = 0; j < pre.cols(); ++j) {
                pre.at(i, j) += layer.bias[j];
                if (layer.spec.activation == Activation::ReLU &&
                    std::abs(pre.at(i, j)) < margin)
                    return false;
            }
        if (layer.spec.activation == Activation::ReLU)
            for (double& v : pre.data()) v = v > 0.0 ? v : 0.0;
        z = std::move(pre);
    }
    return true;
}

bool same_weights(const FeatureExtractor& a, const FeatureExtractor& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weight.data() != b.layers[l].weight.data()) return false;
        if (a.layers[l].bias != b.layers[l].bias) return false;
    }
    return true;
}

// Central differences over every extractor/head parameter of a scalar
// function of the parameters.
template <typename LossFn>
ParamGradients fd_gradients(FeatureExtractor& extractor, ClassifierHead& head, LossFn loss,
                            double h) {
    ParamGradients g;
    g.layer_weight.resize(extractor.layers.size());
    g.layer_bias.resize(extractor.layers.size());
    auto central = [&](double& param) {
        const double orig = param;
        param = orig + h;
        const double fp = loss();
        param = orig - h;
        const double fm = loss();
        param = orig;
        return (fp - fm) / (2.0 * h);
    };
    for (std::size_t l = 0; l < extractor.layers.size(); ++l) {
        Layer& layer = extractor.layers[l];
        g.layer_weight[l] = Matrix(layer.weight.rows(), layer.weight.cols());
        for (std::size_t i = 0; i < layer.weight.size(); ++i)
            g.layer_weight[l].data()[i] = central(layer.weight.data()[i]);
        g.layer_bias[l].resize(layer.bias.size());
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            g.layer_bias[l][i] = central(layer.bias[i]);
    }
    if (!head.bias.empty()) {
        g.head_weight = Matrix(head.weight.rows(), head.weight.cols());
        for (std::size_t i = 0; i < head.weight.size(); ++i)
            g.head_weight.data()[i] = central(head.weight.data()[i]);
        g.head_bias.resize(head.bias.size());
        for (std::size_t i = 0; i < head.bias.size(); ++i) g.head_bias[i] = central(head.bias[i]);
    }
    return g;
}

double max_rel_error(const ParamGradients& a, const ParamGradients& b, bool with_head) {
    // Largest deviation scaled by the largest finite-difference magnitude
    // across every parameter, so dead-unit arrays do not amplify FD noise.
    double num = 0.0, den = 1e-8;
    auto cmp = [&](const std::vector<double>& x, const std::vector<double>& y) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            num = std::max(num, std::abs(x[i] - y[i]));
            den = std::max(den, std::abs(y[i]));
        }
    };
    for (std::size_t l = 0; l < a.layer_weight.size(); ++l) {
        cmp(a.layer_weight[l].data(), b.layer_weight[l].data());
        cmp(a.layer_bias[l], b.layer_bias[l]);
    }
    if (with_head) {
        cmp(a.head_weight.data(), b.head_weight.data());
        cmp(a.head_bias, b.head_bias);
    }
    return num / den;
}

// Blobs rescaled to unit-magnitude coordinates; keeps toy training in the
// well-conditioned regime where fixed learning rates behave.
Dataset scaled_blobs(std::size_t classes, std::uint64_t seed, std::size_t per_class) {
    SeededRng rng(seed);
    Dataset ds = synth_blobs(classes, 2, per_class, 10.0, Warp::None, rng);
    for (double& v : ds.x.data()) v *= 0.1;
    return ds;
}

Dataset two_blobs(std::uint64_t seed, std::size_t per_class) {
    return scaled_blobs(2, seed, per_class);
}

}  // namespace

TEST_SUITE_BEGIN("network");

TEST_CASE("forward: identity network reproduces its input") {
    FeatureExtractor fe;
    fe.layers.push_back({{2, 2, Activation::Identity}, Matrix::identity(2), {0.0, 0.0}});
    SeededRng rng(1);
    const Matrix x = oracle::random_matrix(4, 2, rng);
    const Matrix z = forward(fe, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(z.data()[i] == x.data()[i]);
}

TEST_CASE("forward: relu clips negatives") {
    FeatureExtractor fe;
    fe.layers.push_back({{1, 1, Activation::ReLU}, Matrix::identity(1), {0.0}});
    const Matrix x = Matrix::from_data(2, 1, {-1.0, 2.0});
    const Matrix z = forward(fe, x);
    CHECK(z.at(0, 0) == 0.0);
    CHECK(z.at(1, 0) == 2.0);
}

TEST_CASE("forward: two-layer chain matches hand arithmetic") {
    FeatureExtractor fe;
    fe.layers.push_back(
        {{2, 2, Activation::ReLU}, Matrix::from_data(2, 2, {1, -1, 0, 2}), {0.5, -0.5}});
    fe.layers.push_back(
        {{2, 1, Activation::Identity}, Matrix::from_data(2, 1, {2, -1}), {0.25}});

    // x=[1,2]: pre1=[1.5,2.5] -> relu same -> 1.5*2 + 2.5*(-1) + 0.25 = 0.75
    // x=[-1,0]: pre1=[-0.5,0.5] -> relu [0,0.5] -> 0.5*(-1) + 0.25 = -0.25
    const Matrix x = Matrix::from_data(2, 2, {1, 2, -1, 0});
    const Matrix z = forward(fe, x);
    CHECK(z.at(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(z.at(1, 0) == doctest::Approx(-0.25).epsilon(1e-14));

    CHECK_THROWS_AS(forward(fe, Matrix(1, 3)), DimensionError);
}

TEST_CASE("softmax rows sum to one") {
    SeededRng rng(3);
    const Matrix lg = oracle::random_matrix(5, 4, rng);
    const Matrix p = softmax_rows(lg);
    for (std::size_t i = 0; i < 5; ++i) {
        double s = 0.0;
        for (double v : p.row(i)) s += v;
        CHECK(std::abs(s - 1.0) <= 1e-9);
    }
}

TEST_CASE("predict: dominant logit, lowest-index ties, batch equals per-sample") {
    SeededRng rng(4);
    FeatureExtractor fe = tiny_net({{3, 4, Activation::ReLU}, {4, 2, Activation::Identity}}, 5);
    ClassifierHead head = make_head(2, 3, rng);
    const Matrix x = oracle::random_matrix(6, 3, rng);

    const std::vector<int> batch = predict(fe, head, x);
    for (std::size_t i = 0; i < 6; ++i) {
        const std::vector<std::size_t> one = {i};
        CHECK(predict(fe, head, take_rows(x, one))[0] == batch[i]);
    }

    // All-zero head: every logit ties at the bias, argmax must pick class 0.
    ClassifierHead zero_head{Matrix(2, 3), {0.0, 0.0, 0.0}};
    for (int p : predict(fe, zero_head, x)) CHECK(p == 0);
}

TEST_CASE("cross-entropy and embedding backprop match finite differences") {
    SeededRng rng(6);
    int done = 0;
    for (int t = 0; done < 4 && t < 40; ++t) {
        FeatureExtractor fe = tiny_net({{4, 7, Activation::ReLU},
                                        {7, 5, Activation::ReLU},
                                        {5, 3, Activation::Identity}},
                                       100 + t);
        ClassifierHead head = make_head(3, 3, rng);
        const Matrix x = oracle::random_matrix(6, 4, rng);
        if (!kink_safe(fe, x)) continue;  // FD is not a derivative oracle at a kink
        ++done;
        const std::vector<int> y = {0, 1, 2, 0, 1, 2};

        const ParamGradients analytic = cross_entropy_gradients(fe, head, x, y);
        const ParamGradients fd = fd_gradients(
            fe, head, [&] { return cross_entropy_gradients(fe, head, x, y).loss; }, 1e-6);
        CHECK(max_rel_error(analytic, fd, true) < 1e-5);

        // Injected embedding-gradient path: F = sum_ij G_ij * f(X)_ij.
        const Matrix g = oracle::random_matrix(6, 3, rng);
        const ParamGradients analytic_emb = embedding_gradients(fe, x, g);
        ClassifierHead no_head{Matrix(1, 1), {}};
        const ParamGradients fd_emb = fd_gradients(
            fe, no_head, [&] { return elementwise_dot(forward(fe, x), g); }, 1e-6);
        CHECK(max_rel_error(analytic_emb, fd_emb, false) < 1e-5);
    }
}

TEST_CASE("apply_embedding_gradient: null step, plain-SGD identity, hsic ascent") {
    SeededRng rng(7);
    FeatureExtractor fe = tiny_net({{2, 2, Activation::Identity}}, 8);
    const Matrix x = oracle::random_matrix(2, 2, rng);

    // Zero gradient leaves weights untouched.
    const FeatureExtractor before = fe;
    apply_embedding_gradient(fe, x, Matrix(2, 2), 0.5, GradientSign::Ascent);
    CHECK(same_weights(fe, before));

    // Single linear layer: ascent step adds lr * X^T G to the weights.
    const Matrix g = Matrix::from_data(2, 2, {1.0, -2.0, 0.5, 3.0});
    const double lr = 0.01;
    const Matrix expected_delta = scale(oracle::naive_matmul(transpose(x), g), lr);
    apply_embedding_gradient(fe, x, g, lr, GradientSign::Ascent);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(fe.layers[0].weight.data()[i] ==
              doctest::Approx(before.layers[0].weight.data()[i] + expected_delta.data()[i])
                  .epsilon(1e-12));
    // Bias moves by lr * column sums of G.
    CHECK(fe.layers[0].bias[0] == doctest::Approx(lr * (1.0 + 0.5)).epsilon(1e-12));
    CHECK(fe.layers[0].bias[1] == doctest::Approx(lr * (-2.0 + 3.0)).epsilon(1e-12));

    // Composed with the HSIC gradient: one small ascent step on a frozen
    // batch (sigma frozen too) must not decrease the objective.
    FeatureExtractor net = tiny_net({{3, 5, Activation::ReLU}, {5, 2, Activation::Identity}}, 9);
    const Matrix xb = oracle::random_matrix(6, 3, rng);
    const Matrix k_other = oracle::random_psd(6, rng);
    const Matrix z = forward(net, xb);
    const double sigma = median_heuristic_sigma(z);
    const double f0 = hsic(kernel_matrix(z, KernelSpec::gaussian(sigma)), k_other);
    const Matrix grad = hsic_grad_wrt_embedding(z, k_other, KernelSpec::gaussian(sigma), false);
    apply_embedding_gradient(net, xb, grad, 1e-3, GradientSign::Ascent);
    const Matrix z1 = forward(net, xb);
    const double f1 = hsic(kernel_matrix(z1, KernelSpec::gaussian(sigma)), k_other);
    CHECK(f1 >= f0 - 1e-12);
}

TEST_CASE("pretrain separates well-separated blobs") {
    const Dataset ds = two_blobs(11, 40);
    SeededRng rng(12);
    FeatureExtractor fe = tiny_net({{2, 8, Activation::ReLU}, {8, 4, Activation::Identity}}, 13);
    ClassifierHead head = make_head(4, 2, rng);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.05;
    cfg.seed = 14;
    const TrainingLog log = pretrain(fe, head, ds, cfg);
    CHECK(log.final_accuracy >= 0.99);
    // Cross-entropy non-increasing across epochs on this separable set.
    for (std::size_t e = 1; e < log.epochs.size(); ++e)
        CHECK(log.epochs[e].mean_loss <= log.epochs[e - 1].mean_loss + 1e-9);
}

TEST_CASE("pretrain edge cases: zero epochs, determinism, bad labels") {
    const Dataset ds = two_blobs(15, 10);
    SeededRng rng(16);
    FeatureExtractor fe = tiny_net({{2, 4, Activation::ReLU}, {4, 3, Activation::Identity}}, 17);
    ClassifierHead head = make_head(3, 2, rng);

    FeatureExtractor untouched = fe;
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 18;
    pretrain(fe, head, ds, cfg);
    CHECK(same_weights(fe, untouched));

    cfg.epochs = 5;
    FeatureExtractor a = untouched, b = untouched;
    ClassifierHead ha = head, hb = head;
    pretrain(a, ha, ds, cfg);
    pretrain(b, hb, ds, cfg);
    CHECK(same_weights(a, b));
    CHECK(ha.weight.data() == hb.weight.data());

    Dataset bad = ds;
    bad.y[0] = 7;
    CHECK_THROWS_AS(pretrain(fe, head, bad, cfg), LabelError);
    Dataset empty;
    CHECK_THROWS_AS(pretrain(fe, head, empty, cfg), EmptyInput);
}

TEST_CASE("adam optimizer also learns the blobs") {
    const Dataset ds = two_blobs(19, 30);
    SeededRng rng(20);
    FeatureExtractor fe = tiny_net({{2, 8, Activation::ReLU}, {8, 4, Activation::Identity}}, 21);
    ClassifierHead head = make_head(4, 2, rng);
    TrainConfig cfg;
    cfg.epochs = 25;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.01;
    cfg.optimizer = OptimizerKind::Adam;
    cfg.seed = 22;
    CHECK(pretrain(fe, head, ds, cfg).final_accuracy >= 0.99);
}

TEST_CASE("expansion: widths, copy invariance, exact logit conservation") {
    SeededRng rng(23);
    FeatureExtractor fe = tiny_net({{4, 6, Activation::ReLU}, {6, 8, Activation::Identity}}, 24);
    ClassifierHead head = make_head(8, 5, rng);
    const Matrix x = oracle::random_matrix(10, 4, rng);
    const Matrix logits_before = logits(fe, head, x);

    SeededRng erng(25);
    const ExpansionResult exp = expand(fe, head, 3, 0.25, erng);
    CHECK(exp.added_penultimate_units == 2);  // ceil(0.25 * 8)
    CHECK(exp.extractor.latent_dim() == 10);
    CHECK(exp.head.classes() == 8);
    CHECK_FALSE(exp.no_op);

    // Old weights copied verbatim.
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(exp.extractor.layers[1].weight.at(i, j) == fe.layers[1].weight.at(i, j));
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            CHECK(exp.head.weight.at(i, j) == head.weight.at(i, j));
    // New-penultimate -> old-output block is exactly zero.
    for (std::size_t i = 8; i < 10; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(exp.head.weight.at(i, j) == 0.0);

    // Old-class logits identical at the expansion instant.
    const Matrix logits_after = logits(exp.extractor, exp.head, x);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            CHECK(logits_after.at(i, j) == logits_before.at(i, j));

    // predict() on old classes is invariant across the expansion.
    const std::vector<int> before_pred = predict(fe, head, x);
    std::vector<int> after_pred = predict(exp.extractor, exp.head, x);
    bool all_old = true;
    for (int p : after_pred) all_old &= p < 5;
    if (all_old) CHECK(before_pred == after_pred);

    // No-op expansion flagged.
    const ExpansionResult noop = expand(fe, head, 0, 0.0, erng);
    CHECK(noop.no_op);

    // All-layer variant also conserves old logits at the instant.
    SeededRng arng(26);
    const ExpansionResult all = expand_all_layers(fe, head, 3, 0.25, arng);
    const Matrix logits_all = logits(all.extractor, all.head, x);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(logits_all.at(i, j) == logits_before.at(i, j));
}

TEST_CASE("finetune: frozen backbone at factor zero, separable 4-class mix") {
    SeededRng rng(27);
    const Dataset old_ds = two_blobs(28, 25);
    FeatureExtractor fe = tiny_net({{2, 8, Activation::ReLU}, {8, 4, Activation::Identity}}, 29);
    ClassifierHead head = make_head(4, 2, rng);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.05;
    cfg.seed = 30;
    pretrain(fe, head, old_ds, cfg);

    SeededRng erng(31);
    ExpansionResult exp = expand(fe, head, 2, 0.25, erng);

    // A 4-class separable mix reusing the old two blobs plus two new ones.
    const Dataset four = scaled_blobs(4, 32, 25);

    // Backbone factor 0 freezes every layer but the last two exactly.
    FeatureExtractor frozen = exp.extractor;
    ClassifierHead frozen_head = exp.head;
    TrainConfig ft = cfg;
    ft.epochs = 3;
    finetune_expanded(frozen, frozen_head, four, ft, 0.0);
    CHECK(frozen.layers[0].weight.data() == exp.extractor.layers[0].weight.data());
    CHECK(frozen.layers[0].bias == exp.extractor.layers[0].bias);
    CHECK(frozen.layers[1].weight.data() != exp.extractor.layers[1].weight.data());

    // Full fine-tune reaches high accuracy on the separable mix.
    FeatureExtractor tuned = exp.extractor;
    ClassifierHead tuned_head = exp.head;
    ft.epochs = 30;
    ft.learning_rate = 0.02;
    const TrainingLog log = finetune_expanded(tuned, tuned_head, four, ft, 0.1);
    CHECK(log.final_accuracy >= 0.95);

    Dataset bad = four;
    bad.y[0] = 11;
    CHECK_THROWS_AS(finetune_expanded(tuned, tuned_head, bad, ft, 0.1), LabelError);
}

TEST_SUITE_END();
