#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdknet/data.hpp"
#include "cdknet/discovery.hpp"

namespace cdknet {

// Per-stage seeds derive from the master seed by fixed offsets so stage
// commands reproduce the monolithic run exactly.
constexpr std::uint64_t kStage1SeedOffset = 1;
constexpr std::uint64_t kStage2SeedOffset = 2;
constexpr std::uint64_t kStage3SeedOffset = 3;
constexpr std::uint64_t kDatasetSeedOffset = 100;

struct DatasetSpec {
    enum class Kind { Synthetic, Idx } kind = Kind::Synthetic;
    // synthetic
    std::size_t classes = 6;
    std::size_t dim = 8;
    std::size_t per_class = 300;
    double separation = 8.0;
    Warp warp = Warp::TanhMix;
    std::optional<std::uint64_t> seed;  // default: master seed + kDatasetSeedOffset
    // idx
    std::string images;
    std::string labels;
};

struct AblateSpec {
    std::vector<std::uint64_t> seeds;            // default: {master seed}
    std::vector<std::string> lambda_values;      // numbers or "inf"
    std::vector<double> subsample_values;        // 0 means "skip stage 2"
    std::vector<std::string> expansion_values;   // none|last-only|last-two|all
};

// The validated, defaults-filled experiment description. `canonical` is the
// effective config document whose FNV-1a hash identifies the run.
struct ExperimentConfig {
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";
    DatasetSpec dataset;
    std::vector<int> old_classes;
    PipelineConfig pipeline;
    AblateSpec ablate;
    std::string canonical;

    std::string config_hash() const;
};

// Parses and validates a config document; unknown keys anywhere are
// rejected, defaults are filled, and per-stage seeds are derived.
// Throws ConfigError with a key path on any violation.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

// --out / --seed overrides; re-derives stage seeds and the canonical form.
void override_output_dir(ExperimentConfig& cfg, const std::string& dir);
void override_seed(ExperimentConfig& cfg, std::uint64_t seed);

Dataset build_dataset(const ExperimentConfig& cfg);
OpenWorldSplit build_split(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Commands (the CLI is a thin argv wrapper over these)
// ---------------------------------------------------------------------------

struct RunResult {
    MetricsReport report;
    double cluster_acc = 0.0;
    double cluster_nmi = 0.0;
    double cluster_ari = 0.0;
};

// Full pipeline; writes metrics.json, pseudo_labels.csv,
// objective_history.csv, checkpoint_stage{1,2,3}.json and manifest.json
// under the output directory.
RunResult cmd_run(const ExperimentConfig& cfg);

void cmd_pretrain(const ExperimentConfig& cfg);
void cmd_discover(const ExperimentConfig& cfg);  // needs checkpoint_stage1.json
void cmd_expand(const ExperimentConfig& cfg);    // needs stage2 checkpoint + pseudo labels
MetricsReport cmd_evaluate(const ExperimentConfig& cfg);  // needs stage1+stage3 checkpoints

enum class SweepKind { Lambda, Subsample, ExpansionStrategy };

struct AblateRow {
    std::string value;
    MetricsReport mean;  // averaged over the configured seeds
    double cluster_nmi = 0.0;
};

// Runs the pipeline per sweep value (averaged over ablate.seeds) and writes
// ablation_<sweep>.csv. Subsample value 0 maps to "no stage-2 refinement"
// (the SSCD baseline); lambda "inf" maps to the lambda_infinity flag.
std::vector<AblateRow> cmd_ablate(const ExperimentConfig& cfg, SweepKind sweep);

std::string sweep_name(SweepKind sweep);

// Expected artifact path helpers (shared with tests).
std::string checkpoint_path(const std::string& out_dir, int stage);
std::string metrics_path(const std::string& out_dir);
std::string pseudo_labels_path(const std::string& out_dir);
std::string objective_history_path(const std::string& out_dir);
std::string manifest_path(const std::string& out_dir);

}  // namespace cdknet
