#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdknet/data.hpp"
#include "cdknet/matrix.hpp"
#include "cdknet/metrics.hpp"
#include "cdknet/network.hpp"
#include "cdknet/rng.hpp"

namespace cdknet {

// Bandwidth policy for the Gaussian kernels on embeddings: the median
// heuristic recomputed from the embeddings at hand, or a fixed value.
struct SigmaPolicy {
    std::optional<double> fixed;  // nullopt -> median heuristic

    static SigmaPolicy median() { return {std::nullopt}; }
    static SigmaPolicy fixed_value(double sigma) { return {sigma}; }
};

struct DiscoveryConfig {
    double lambda = 10.0;          // supervised weight
    bool lambda_infinity = false;  // keep only the supervised term
    double subsample_rate = 0.03;  // fraction of each of D_l, D_u
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    SigmaPolicy sigma = SigmaPolicy::median();
    std::uint64_t seed = 0;
    std::size_t kmeans_restarts = 10;
};

// Derived rng streams; fixed offsets keep stages independently reproducible.
constexpr std::uint64_t kSubsampleSeedOffset = 10;
constexpr std::uint64_t kBatchSeedOffset = 11;
constexpr std::uint64_t kPseudoLabelSeedOffset = 12;

struct Subsample {
    std::vector<std::size_t> labeled_idx;    // into D_l
    std::vector<std::size_t> unlabeled_idx;  // into D_u
    Matrix x1;                               // [X_l1; X_u1]
    std::vector<int> y1;                     // labels of the labeled block
    std::size_t n1 = 0;                      // labeled rows in x1
    std::size_t n1_prime = 0;                // unlabeled rows in x1
};

// Stratified draw on D_l (largest-remainder quotas per class, at least one
// point per class) plus a plain draw on D_u; sizes round(rate * n) and
// round(rate * n'). Throws ConfigError when rate is outside (0, 1] or the
// labeled quota cannot cover every class.
Subsample subsample(const Dataset& d_l, const Matrix& d_u_x, double rate, SeededRng& rng);

struct DiscoveryState {
    FeatureExtractor* extractor = nullptr;  // non-owning; mutated by updates
    Subsample sample;
    Matrix y1_onehot;                 // n1 x m_l
    Matrix u;                         // (n1+n1') x r, orthonormal columns
    std::vector<double> u_eigenvalues;
    std::vector<std::pair<std::size_t, double>> objective_history;  // (epoch, H_o)
    std::vector<int> pseudo_labels;   // over ALL of D_u, filled by run_cdknet
    bool batch_clamped = false;
    DiscoveryConfig cfg;
    std::size_t m_l = 0;
    std::size_t r = 0;                // m_l + m_u
};

// Builds the state: subsamples, one-hot encodes Y_1, and initializes U by
// the spectral embedding of the Gaussian kernel on f_theta(X_1).
// Under lambda_infinity the U machinery is skipped (the unsupervised term
// is removed from the problem).
DiscoveryState make_discovery_state(FeatureExtractor& extractor, const Dataset& d_l,
                                    const Matrix& d_u_x, std::size_t m_u,
                                    const DiscoveryConfig& cfg);

// H_o on the fixed subsample: hsic(normalized Gaussian on f(X_1), U U^T)
// plus lambda * hsic(Gaussian on f(X_l1), Y_1 Y_1^T). Under lambda_infinity
// only the supervised term is reported (with unit weight).
double objective(const DiscoveryState& state);

// One epoch of alternating stochastic ascent: per unlabeled batch a step
// on H(f(X_b), U_b) at rate gamma, then per labeled batch a step on
// H(f(X_b), Y_b) at rate lambda*gamma. Batches larger than the subsample
// are clamped (flagged on the state).
void update_theta_epoch(DiscoveryState& state, SeededRng& batch_rng);

// U <- top-r eigenvectors of H D^{-1/2} K_{f(X_1)} D^{-1/2} H.
void update_u(DiscoveryState& state);

// Algorithm: init U spectrally, then per epoch one theta pass followed by
// a U update, logging H_o; finally pseudo-labels from k-means (k = m_u) on
// f_theta of ALL unlabeled samples.
DiscoveryState run_cdknet(FeatureExtractor& extractor, const Dataset& d_l, const Matrix& d_u_x,
                          std::size_t m_u, const DiscoveryConfig& cfg);

// Pretrain-then-cluster baseline: k-means directly on stage-1 f_theta(X_u).
std::vector<int> baseline_sscd(const FeatureExtractor& extractor, const Matrix& d_u_x,
                               std::size_t m_u, SeededRng& rng, std::size_t restarts = 10);

// ---------------------------------------------------------------------------
// Full three-stage pipeline
// ---------------------------------------------------------------------------

enum class ExpansionStrategy {
    LastTwo,   // penultimate +frac units, head +m_u outputs
    LastOnly,  // head only
    AllLayers, // experimental: every hidden layer grows by frac
    None,      // skip stage 3 entirely; pseudo-labels are the final output
};

struct Stage3Config {
    TrainConfig train;
    ExpansionStrategy strategy = ExpansionStrategy::LastTwo;
    double penultimate_frac = 0.25;
    double old_fraction = 0.20;       // share of D_l mixed into fine-tuning
    double backbone_lr_factor = 0.1;
};

struct Stage3Outcome {
    FeatureExtractor extractor;
    ClassifierHead head;
    TrainingLog log;
    std::size_t added_penultimate_units = 0;
};

// Expansion + fine-tuning on pseudo-labeled D_u plus old_fraction of D_l,
// shared by the monolithic pipeline and the stage-scoped command so the two
// paths stay bit-identical. Must not be called with ExpansionStrategy::None.
Stage3Outcome run_stage3(const Dataset& d_l, const Matrix& d_u_x,
                         const std::vector<int>& pseudo_labels,
                         const FeatureExtractor& refined, const ClassifierHead& head,
                         std::size_t m_u, const Stage3Config& cfg);

struct NetworkShape {
    std::vector<std::size_t> hidden;  // widths before the latent layer
    std::size_t latent_dim = 16;
};

struct PipelineConfig {
    NetworkShape shape;
    TrainConfig stage1;
    DiscoveryConfig stage2;
    Stage3Config stage3;
};

// Reported by run_full_pipeline; `report` carries the final (post-expansion)
// new-class metrics and old-class accuracies, `cluster_*` the stage-2
// pseudo-label metrics before expansion.
struct PipelineOutcome {
    FeatureExtractor pretrained_extractor;  // stage-1 snapshot
    ClassifierHead pretrained_head;
    FeatureExtractor refined_extractor;  // after stage-2 refinement, pre-expansion
    ClassifierHead refined_head;
    FeatureExtractor expanded_extractor;
    ClassifierHead expanded_head;
    DiscoveryState state;
    MetricsReport report;
    double cluster_acc = 0.0;
    double cluster_nmi = 0.0;
    double cluster_ari = 0.0;
    TrainingLog stage1_log;
    TrainingLog stage3_log;
};

// Optional per-stage notification (timing, progress, error labeling).
using StageCallback = std::function<void(const std::string& stage)>;

// Stage 1 pretrain -> Stage 2 run_cdknet -> Stage 3 expand + fine-tune on
// pseudo-labeled D_u plus old_fraction of D_l. New-class metrics come from
// the expanded network's predictions on D_u (prediction p >= m_l maps to
// cluster p - m_l; old-class predictions keep distinct ids so they count
// as errors); old-class accuracy is measured on D_l before and after.
PipelineOutcome run_full_pipeline(const OpenWorldSplit& split, const PipelineConfig& cfg,
                                  const StageCallback& on_stage = {});

// Maps expanded-network predictions on D_u to cluster ids as above.
std::vector<int> predictions_to_clusters(const std::vector<int>& pred, std::size_t m_l,
                                         std::size_t m_u);

void write_pseudo_labels_csv(const std::vector<int>& labels, const std::string& path);
void write_objective_history_csv(const std::vector<std::pair<std::size_t, double>>& history,
                                 const std::string& path);

}  // namespace cdknet
