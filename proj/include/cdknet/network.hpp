#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

#include "cdknet/data.hpp"
#include "cdknet/matrix.hpp"
#include "cdknet/rng.hpp"

namespace cdknet {

enum class Activation { ReLU, Identity };

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::ReLU;
};

struct Layer {
    LayerSpec spec;
    Matrix weight;             // input_dim x output_dim
    std::vector<double> bias;  // output_dim
};

// f_theta: everything up to and including the penultimate layer of the
// DNN. Its output is the latent embedding the HSIC objective acts on.
struct FeatureExtractor {
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().spec.input_dim; }
    std::size_t latent_dim() const { return layers.back().spec.output_dim; }
};

// Final dense layer + softmax.
struct ClassifierHead {
    Matrix weight;             // latent_dim x classes
    std::vector<double> bias;  // classes

    std::size_t classes() const { return bias.size(); }
};

enum class OptimizerKind { SgdMomentum, Adam };

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    OptimizerKind optimizer = OptimizerKind::SgdMomentum;
    std::uint64_t seed = 0;
};

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
};

struct TrainingLog {
    std::vector<EpochStats> epochs;
    double final_accuracy = 0.0;
};

// Glorot-uniform weights, zero biases.
FeatureExtractor make_extractor(const std::vector<LayerSpec>& specs, SeededRng& rng);
ClassifierHead make_head(std::size_t latent_dim, std::size_t classes, SeededRng& rng);

// Latent embedding f_theta(x), one row per sample.
Matrix forward(const FeatureExtractor& extractor, const Matrix& x);

Matrix logits(const FeatureExtractor& extractor, const ClassifierHead& head, const Matrix& x);

// Row-stochastic softmax (stable, max-subtracted).
Matrix softmax_rows(const Matrix& logit_matrix);

// Argmax with ties broken toward the lowest class index.
std::vector<int> predict(const FeatureExtractor& extractor, const ClassifierHead& head,
                         const Matrix& x);

// Parameter gradients in extractor/head layout order.
struct ParamGradients {
    std::vector<Matrix> layer_weight;
    std::vector<std::vector<double>> layer_bias;
    Matrix head_weight;                // empty when no head participates
    std::vector<double> head_bias;
    double loss = 0.0;                 // mean cross-entropy (head paths only)
};

// Mean cross-entropy gradients for a labeled batch.
ParamGradients cross_entropy_gradients(const FeatureExtractor& extractor,
                                       const ClassifierHead& head, const Matrix& x,
                                       const std::vector<int>& y);

// Gradients of the scalar sum_ij G_ij * f_theta(X)_ij, i.e. the supplied
// embedding-space gradient pulled back through the extractor.
ParamGradients embedding_gradients(const FeatureExtractor& extractor, const Matrix& x,
                                   const Matrix& d_loss_d_embedding);

enum class GradientSign { Ascent, Descent };

// One plain-SGD step on theta along the supplied embedding-space gradient;
// this is the primitive the stage-2 updates are built from.
void apply_embedding_gradient(FeatureExtractor& extractor, const Matrix& x_batch,
                              const Matrix& d_loss_d_embedding, double lr, GradientSign sign);

// Supervised training of extractor + head by minibatch cross-entropy
// descent. Throws EmptyInput on an empty dataset, LabelError on labels
// outside [0, head.classes()).
TrainingLog pretrain(FeatureExtractor& extractor, ClassifierHead& head, const Dataset& d_l,
                     const TrainConfig& cfg);

struct ExpansionResult {
    FeatureExtractor extractor;
    ClassifierHead head;
    std::size_t added_penultimate_units = 0;
    bool no_op = false;  // m_u == 0 and penultimate_frac == 0
};

// Grows the penultimate layer by ceil(frac * latent_dim) units and the head
// by m_u outputs. Existing weights are copied verbatim; connections from
// the new penultimate units to the old outputs are zero, so old-class
// logits are unchanged at the expansion instant. Remaining new weights are
// Glorot-uniform.
ExpansionResult expand(const FeatureExtractor& extractor, const ClassifierHead& head,
                       std::size_t m_u, double penultimate_frac, SeededRng& rng);

// Experimental all-layer variant: every hidden layer grows by `frac`, new
// units wired into old ones with zeros (function preserved at expansion).
ExpansionResult expand_all_layers(const FeatureExtractor& extractor, const ClassifierHead& head,
                                  std::size_t m_u, double frac, SeededRng& rng);

// Cross-entropy fine-tuning where the last extractor layer and the head
// step at the full learning rate and every earlier layer at
// backbone_lr_factor times it (0 freezes the backbone exactly).
TrainingLog finetune_expanded(FeatureExtractor& extractor, ClassifierHead& head,
                              const Dataset& d_mix, const TrainConfig& cfg,
                              double backbone_lr_factor);

}  // namespace cdknet
