#include "cdknet/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cdknet/checkpoint.hpp"
#include "cdknet/errors.hpp"

namespace cdknet {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kConfigSchema = 1;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) bad(path, "unknown key '" + key + "'");
}

double get_positive(const json& obj, const std::string& path, const std::string& key,
                    double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) bad(path + "." + key, "expected a number");
    const double v = obj[key].get<double>();
    if (v <= 0.0) bad(path + "." + key, "must be > 0");
    return v;
}

std::size_t get_count(const json& obj, const std::string& path, const std::string& key,
                      std::size_t fallback, std::size_t min_value = 0) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_unsigned()) bad(path + "." + key, "expected a non-negative integer");
    const std::size_t v = obj[key].get<std::size_t>();
    if (v < min_value) bad(path + "." + key, "must be >= " + std::to_string(min_value));
    return v;
}

OptimizerKind parse_optimizer(const json& obj, const std::string& path) {
    if (!obj.contains("optimizer")) return OptimizerKind::SgdMomentum;
    const std::string s = obj["optimizer"].get<std::string>();
    if (s == "sgd-momentum") return OptimizerKind::SgdMomentum;
    if (s == "adam") return OptimizerKind::Adam;
    bad(path + ".optimizer", "expected 'sgd-momentum' or 'adam'");
}

TrainConfig parse_train(const json& obj, const std::string& path, std::size_t default_epochs) {
    reject_unknown_keys(obj, path, {"epochs", "batch_size", "learning_rate", "optimizer"});
    TrainConfig cfg;
    cfg.epochs = get_count(obj, path, "epochs", default_epochs);
    cfg.batch_size = get_count(obj, path, "batch_size", 64, 1);
    cfg.learning_rate = get_positive(obj, path, "learning_rate", 0.01);
    cfg.optimizer = parse_optimizer(obj, path);
    return cfg;
}

ExpansionStrategy parse_strategy(const std::string& s, const std::string& path) {
    if (s == "last-two") return ExpansionStrategy::LastTwo;
    if (s == "last-only") return ExpansionStrategy::LastOnly;
    if (s == "all") return ExpansionStrategy::AllLayers;
    if (s == "none") return ExpansionStrategy::None;
    bad(path, "expected one of none|last-only|last-two|all, got '" + s + "'");
}

void derive_stage_seeds(ExperimentConfig& cfg) {
    cfg.pipeline.stage1.seed = cfg.master_seed + kStage1SeedOffset;
    cfg.pipeline.stage2.seed = cfg.master_seed + kStage2SeedOffset;
    cfg.pipeline.stage3.train.seed = cfg.master_seed + kStage3SeedOffset;
}

std::string strategy_name(ExpansionStrategy s) {
    switch (s) {
        case ExpansionStrategy::LastTwo: return "last-two";
        case ExpansionStrategy::LastOnly: return "last-only";
        case ExpansionStrategy::AllLayers: return "all";
        case ExpansionStrategy::None: return "none";
    }
    return "last-two";
}

// The effective config with every default materialized; its dump is the
// canonical form behind config_hash.
json canonical_json(const ExperimentConfig& cfg) {
    json doc;
    doc["schema"] = kConfigSchema;
    doc["seed"] = cfg.master_seed;
    doc["output_dir"] = cfg.output_dir;
    if (cfg.dataset.kind == DatasetSpec::Kind::Synthetic) {
        doc["dataset"] = {{"kind", "synthetic"},
                          {"classes", cfg.dataset.classes},
                          {"dim", cfg.dataset.dim},
                          {"per_class", cfg.dataset.per_class},
                          {"separation", cfg.dataset.separation},
                          {"warp", cfg.dataset.warp == Warp::TanhMix ? "tanh-mix" : "none"}};
        if (cfg.dataset.seed) doc["dataset"]["seed"] = *cfg.dataset.seed;
    } else {
        doc["dataset"] = {{"kind", "idx"},
                          {"images", cfg.dataset.images},
                          {"labels", cfg.dataset.labels}};
    }
    doc["old_classes"] = cfg.old_classes;
    doc["network"] = {{"hidden", cfg.pipeline.shape.hidden},
                      {"latent_dim", cfg.pipeline.shape.latent_dim}};
    auto train_json = [](const TrainConfig& t) {
        return json{{"epochs", t.epochs},
                    {"batch_size", t.batch_size},
                    {"learning_rate", t.learning_rate},
                    {"optimizer", t.optimizer == OptimizerKind::Adam ? "adam" : "sgd-momentum"}};
    };
    doc["stage1"] = train_json(cfg.pipeline.stage1);
    const DiscoveryConfig& d = cfg.pipeline.stage2;
    doc["stage2"] = {{"lambda", d.lambda_infinity ? json("inf") : json(d.lambda)},
                     {"subsample_rate", d.subsample_rate},
                     {"epochs", d.epochs},
                     {"batch_size", d.batch_size},
                     {"learning_rate", d.learning_rate},
                     {"sigma", d.sigma.fixed ? json(*d.sigma.fixed) : json("median")},
                     {"kmeans_restarts", d.kmeans_restarts}};
    const Stage3Config& s3 = cfg.pipeline.stage3;
    doc["stage3"] = train_json(s3.train);
    doc["stage3"]["strategy"] = strategy_name(s3.strategy);
    doc["stage3"]["penultimate_frac"] = s3.penultimate_frac;
    doc["stage3"]["old_fraction"] = s3.old_fraction;
    doc["stage3"]["backbone_lr_factor"] = s3.backbone_lr_factor;
    if (!cfg.ablate.seeds.empty() || !cfg.ablate.lambda_values.empty() ||
        !cfg.ablate.subsample_values.empty() || !cfg.ablate.expansion_values.empty()) {
        doc["ablate"] = json::object();
        if (!cfg.ablate.seeds.empty()) doc["ablate"]["seeds"] = cfg.ablate.seeds;
        if (!cfg.ablate.lambda_values.empty()) doc["ablate"]["lambda"] = cfg.ablate.lambda_values;
        if (!cfg.ablate.subsample_values.empty())
            doc["ablate"]["subsample"] = cfg.ablate.subsample_values;
        if (!cfg.ablate.expansion_values.empty())
            doc["ablate"]["expansion_strategy"] = cfg.ablate.expansion_values;
    }
    return doc;
}

void refresh_canonical(ExperimentConfig& cfg) { cfg.canonical = canonical_json(cfg).dump(); }

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

json metrics_json(const ExperimentConfig& cfg, const MetricsReport& report) {
    return json{{"acc", report.acc},
                {"nmi", report.nmi},
                {"ari", report.ari},
                {"old_acc_before", report.old_acc_before},
                {"old_acc_after", report.old_acc_after},
                {"seed", cfg.master_seed},
                {"config_hash", cfg.config_hash()}};
}

void ensure_output_dir(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output_dir);
}

std::vector<int> read_pseudo_labels_csv(const std::string& path) {
    if (!fs::exists(path)) throw MissingArtifact("pseudo-label file not found", path);
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line) || line != "index,pseudo_label")
        throw FormatError("bad pseudo-label header in " + path);
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t index;
        int label;
        if (std::sscanf(line.c_str(), "%zu,%d", &index, &label) != 2 || index != labels.size())
            throw FormatError("bad pseudo-label row '" + line + "' in " + path);
        labels.push_back(label);
    }
    return labels;
}

}  // namespace

std::string ExperimentConfig::config_hash() const {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical)));
    return buf;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: unparsable JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown_keys(doc, "$",
                        {"schema", "seed", "output_dir", "dataset", "old_classes", "network",
                         "stage1", "stage2", "stage3", "ablate"});
    if (!doc.contains("schema") || !doc["schema"].is_number_integer() ||
        doc["schema"].get<int>() != kConfigSchema)
        throw ConfigError("config: $.schema: required and must equal 1");

    ExperimentConfig cfg;
    cfg.master_seed = get_count(doc, "$", "seed", 1);
    if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();

    if (!doc.contains("dataset")) bad("$.dataset", "required");
    const json& ds = doc["dataset"];
    const std::string kind = ds.value("kind", "synthetic");
    if (kind == "synthetic") {
        reject_unknown_keys(ds, "$.dataset",
                            {"kind", "classes", "dim", "per_class", "separation", "warp", "seed"});
        cfg.dataset.kind = DatasetSpec::Kind::Synthetic;
        cfg.dataset.classes = get_count(ds, "$.dataset", "classes", 6, 2);
        cfg.dataset.dim = get_count(ds, "$.dataset", "dim", 8, 1);
        cfg.dataset.per_class = get_count(ds, "$.dataset", "per_class", 300, 1);
        cfg.dataset.separation = get_positive(ds, "$.dataset", "separation", 8.0);
        const std::string warp = ds.value("warp", "tanh-mix");
        if (warp == "tanh-mix")
            cfg.dataset.warp = Warp::TanhMix;
        else if (warp == "none")
            cfg.dataset.warp = Warp::None;
        else
            bad("$.dataset.warp", "expected 'tanh-mix' or 'none'");
        if (ds.contains("seed")) cfg.dataset.seed = get_count(ds, "$.dataset", "seed", 0);
    } else if (kind == "idx") {
        reject_unknown_keys(ds, "$.dataset", {"kind", "images", "labels"});
        cfg.dataset.kind = DatasetSpec::Kind::Idx;
        if (!ds.contains("images") || !ds.contains("labels"))
            bad("$.dataset", "idx datasets need 'images' and 'labels' paths");
        cfg.dataset.images = ds["images"].get<std::string>();
        cfg.dataset.labels = ds["labels"].get<std::string>();
    } else {
        bad("$.dataset.kind", "expected 'synthetic' or 'idx'");
    }

    if (!doc.contains("old_classes") || !doc["old_classes"].is_array() ||
        doc["old_classes"].empty())
        bad("$.old_classes", "required non-empty array of class labels");
    for (const json& v : doc["old_classes"]) {
        if (!v.is_number_integer() || v.get<int>() < 0)
            bad("$.old_classes", "entries must be non-negative integers");
        cfg.old_classes.push_back(v.get<int>());
    }

    if (doc.contains("network")) {
        const json& net = doc["network"];
        reject_unknown_keys(net, "$.network", {"hidden", "latent_dim"});
        if (net.contains("hidden")) {
            if (!net["hidden"].is_array()) bad("$.network.hidden", "expected an array of widths");
            cfg.pipeline.shape.hidden.clear();
            for (const json& w : net["hidden"]) {
                if (!w.is_number_unsigned() || w.get<std::size_t>() == 0)
                    bad("$.network.hidden", "widths must be positive integers");
                cfg.pipeline.shape.hidden.push_back(w.get<std::size_t>());
            }
        } else {
            cfg.pipeline.shape.hidden = {64};
        }
        cfg.pipeline.shape.latent_dim = get_count(net, "$.network", "latent_dim", 16, 1);
    } else {
        cfg.pipeline.shape.hidden = {64};
        cfg.pipeline.shape.latent_dim = 16;
    }

    cfg.pipeline.stage1 =
        parse_train(doc.value("stage1", json::object()), "$.stage1", /*default_epochs=*/50);

    {
        const json& s2 = doc.value("stage2", json::object());
        reject_unknown_keys(s2, "$.stage2",
                            {"lambda", "subsample_rate", "epochs", "batch_size", "learning_rate",
                             "sigma", "kmeans_restarts"});
        DiscoveryConfig& d = cfg.pipeline.stage2;
        if (s2.contains("lambda")) {
            if (s2["lambda"].is_string()) {
                if (s2["lambda"].get<std::string>() != "inf")
                    bad("$.stage2.lambda", "expected a number >= 0 or 'inf'");
                d.lambda_infinity = true;
            } else if (s2["lambda"].is_number()) {
                d.lambda = s2["lambda"].get<double>();
                if (d.lambda < 0.0) bad("$.stage2.lambda", "must be >= 0");
            } else {
                bad("$.stage2.lambda", "expected a number >= 0 or 'inf'");
            }
        }
        if (s2.contains("subsample_rate")) {
            if (!s2["subsample_rate"].is_number()) bad("$.stage2.subsample_rate", "expected a number");
            d.subsample_rate = s2["subsample_rate"].get<double>();
            if (!(d.subsample_rate > 0.0) || d.subsample_rate > 1.0)
                bad("$.stage2.subsample_rate", "must be in (0, 1]");
        }
        d.epochs = get_count(s2, "$.stage2", "epochs", 20);
        d.batch_size = get_count(s2, "$.stage2", "batch_size", 64, 2);
        d.learning_rate = get_positive(s2, "$.stage2", "learning_rate", 0.01);
        if (s2.contains("sigma")) {
            if (s2["sigma"].is_string()) {
                if (s2["sigma"].get<std::string>() != "median")
                    bad("$.stage2.sigma", "expected 'median' or a positive number");
                d.sigma = SigmaPolicy::median();
            } else if (s2["sigma"].is_number() && s2["sigma"].get<double>() > 0.0) {
                d.sigma = SigmaPolicy::fixed_value(s2["sigma"].get<double>());
            } else {
                bad("$.stage2.sigma", "expected 'median' or a positive number");
            }
        }
        d.kmeans_restarts = get_count(s2, "$.stage2", "kmeans_restarts", 10, 1);
    }

    {
        const json& s3 = doc.value("stage3", json::object());
        reject_unknown_keys(s3, "$.stage3",
                            {"epochs", "batch_size", "learning_rate", "optimizer", "strategy",
                             "penultimate_frac", "old_fraction", "backbone_lr_factor"});
        cfg.pipeline.stage3.train.epochs = get_count(s3, "$.stage3", "epochs", 30);
        cfg.pipeline.stage3.train.batch_size = get_count(s3, "$.stage3", "batch_size", 64, 1);
        cfg.pipeline.stage3.train.learning_rate =
            get_positive(s3, "$.stage3", "learning_rate", 0.01);
        cfg.pipeline.stage3.train.optimizer = parse_optimizer(s3, "$.stage3");
        if (s3.contains("strategy"))
            cfg.pipeline.stage3.strategy =
                parse_strategy(s3["strategy"].get<std::string>(), "$.stage3.strategy");
        if (s3.contains("penultimate_frac")) {
            if (!s3["penultimate_frac"].is_number() || s3["penultimate_frac"].get<double>() < 0.0)
                bad("$.stage3.penultimate_frac", "must be a number >= 0");
            cfg.pipeline.stage3.penultimate_frac = s3["penultimate_frac"].get<double>();
        }
        if (s3.contains("old_fraction")) {
            const double v = s3["old_fraction"].get<double>();
            if (v < 0.0 || v > 1.0) bad("$.stage3.old_fraction", "must be in [0, 1]");
            cfg.pipeline.stage3.old_fraction = v;
        }
        if (s3.contains("backbone_lr_factor")) {
            const double v = s3["backbone_lr_factor"].get<double>();
            if (v < 0.0) bad("$.stage3.backbone_lr_factor", "must be >= 0");
            cfg.pipeline.stage3.backbone_lr_factor = v;
        }
    }

    if (doc.contains("ablate")) {
        const json& ab = doc["ablate"];
        reject_unknown_keys(ab, "$.ablate",
                            {"seeds", "lambda", "subsample", "expansion_strategy"});
        if (ab.contains("seeds"))
            for (const json& s : ab["seeds"]) {
                if (!s.is_number_unsigned()) bad("$.ablate.seeds", "expected unsigned integers");
                cfg.ablate.seeds.push_back(s.get<std::uint64_t>());
            }
        if (ab.contains("lambda"))
            for (const json& v : ab["lambda"]) {
                if (v.is_string() && v.get<std::string>() == "inf")
                    cfg.ablate.lambda_values.push_back("inf");
                else if (v.is_number() && v.get<double>() >= 0.0) {
                    std::ostringstream os;
                    os << v.get<double>();
                    cfg.ablate.lambda_values.push_back(os.str());
                } else
                    bad("$.ablate.lambda", "entries must be numbers >= 0 or 'inf'");
            }
        if (ab.contains("subsample"))
            for (const json& v : ab["subsample"]) {
                if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() > 1.0)
                    bad("$.ablate.subsample", "entries must be numbers in [0, 1]");
                cfg.ablate.subsample_values.push_back(v.get<double>());
            }
        if (ab.contains("expansion_strategy"))
            for (const json& v : ab["expansion_strategy"]) {
                parse_strategy(v.get<std::string>(), "$.ablate.expansion_strategy");
                cfg.ablate.expansion_values.push_back(v.get<std::string>());
            }
    }

    derive_stage_seeds(cfg);
    refresh_canonical(cfg);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str());
}

void override_output_dir(ExperimentConfig& cfg, const std::string& dir) {
    cfg.output_dir = dir;
    refresh_canonical(cfg);
}

void override_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.master_seed = seed;
    derive_stage_seeds(cfg);
    refresh_canonical(cfg);
}

Dataset build_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset.kind == DatasetSpec::Kind::Idx)
        return load_idx(cfg.dataset.images, cfg.dataset.labels);
    SeededRng rng(cfg.dataset.seed.value_or(cfg.master_seed + kDatasetSeedOffset));
    return synth_blobs(cfg.dataset.classes, cfg.dataset.dim, cfg.dataset.per_class,
                       cfg.dataset.separation, cfg.dataset.warp, rng);
}

OpenWorldSplit build_split(const ExperimentConfig& cfg) {
    return make_split(build_dataset(cfg), cfg.old_classes);
}

std::string checkpoint_path(const std::string& out_dir, int stage) {
    return out_dir + "/checkpoint_stage" + std::to_string(stage) + ".json";
}
std::string metrics_path(const std::string& out_dir) { return out_dir + "/metrics.json"; }
std::string pseudo_labels_path(const std::string& out_dir) {
    return out_dir + "/pseudo_labels.csv";
}
std::string objective_history_path(const std::string& out_dir) {
    return out_dir + "/objective_history.csv";
}
std::string manifest_path(const std::string& out_dir) { return out_dir + "/manifest.json"; }

RunResult cmd_run(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    const OpenWorldSplit split = build_split(cfg);

    std::vector<std::pair<std::string, double>> timings;
    std::string current_stage = "setup";
    auto last = std::chrono::steady_clock::now();
    auto on_stage = [&](const std::string& name) {
        const auto now = std::chrono::steady_clock::now();
        if (!timings.empty() || current_stage != "setup")
            timings.emplace_back(current_stage, std::chrono::duration<double>(now - last).count());
        current_stage = name;
        last = now;
    };

    PipelineOutcome outcome;
    try {
        outcome = run_full_pipeline(split, cfg.pipeline, on_stage);
    } catch (const Error& e) {
        throw Error("stage " + current_stage + ": " + e.what());
    }
    on_stage("done");

    save_checkpoint({outcome.pretrained_extractor, outcome.pretrained_head,
                     cfg.pipeline.stage1.seed},
                    checkpoint_path(cfg.output_dir, 1));
    save_checkpoint({outcome.refined_extractor, outcome.refined_head, cfg.pipeline.stage2.seed},
                    checkpoint_path(cfg.output_dir, 2));
    save_checkpoint({outcome.expanded_extractor, outcome.expanded_head,
                     cfg.pipeline.stage3.train.seed},
                    checkpoint_path(cfg.output_dir, 3));
    write_pseudo_labels_csv(outcome.state.pseudo_labels, pseudo_labels_path(cfg.output_dir));
    write_objective_history_csv(outcome.state.objective_history,
                                objective_history_path(cfg.output_dir));
    atomic_write_text(metrics_path(cfg.output_dir),
                      metrics_json(cfg, outcome.report).dump(2) + "\n");

    json manifest;
    manifest["schema"] = 1;
    manifest["config_hash"] = cfg.config_hash();
    manifest["seed"] = cfg.master_seed;
    manifest["stages"] = json::array();
    for (const auto& [name, seconds] : timings)
        manifest["stages"].push_back({{"name", name}, {"seconds", seconds}});
    manifest["artifacts"] = {"checkpoint_stage1.json", "checkpoint_stage2.json",
                             "checkpoint_stage3.json", "pseudo_labels.csv",
                             "objective_history.csv", "metrics.json"};
    manifest["metrics"] = metrics_json(cfg, outcome.report);
    manifest["metrics"]["cluster_acc"] = outcome.cluster_acc;
    manifest["metrics"]["cluster_nmi"] = outcome.cluster_nmi;
    manifest["metrics"]["cluster_ari"] = outcome.cluster_ari;
    atomic_write_text(manifest_path(cfg.output_dir), manifest.dump(2) + "\n");

    return {outcome.report, outcome.cluster_acc, outcome.cluster_nmi, outcome.cluster_ari};
}

void cmd_pretrain(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    const OpenWorldSplit split = build_split(cfg);
    SeededRng init_rng(cfg.pipeline.stage1.seed);
    std::vector<LayerSpec> specs;
    std::size_t prev = split.d_l.dim();
    for (std::size_t width : cfg.pipeline.shape.hidden) {
        specs.push_back({prev, width, Activation::ReLU});
        prev = width;
    }
    specs.push_back({prev, cfg.pipeline.shape.latent_dim, Activation::Identity});
    FeatureExtractor extractor = make_extractor(specs, init_rng);
    ClassifierHead head = make_head(cfg.pipeline.shape.latent_dim, split.m_l, init_rng);
    const TrainingLog log = pretrain(extractor, head, split.d_l, cfg.pipeline.stage1);
    save_checkpoint({extractor, head, cfg.pipeline.stage1.seed},
                    checkpoint_path(cfg.output_dir, 1));
    std::printf("pretrain: final training accuracy %.4f\n", log.final_accuracy);
}

void cmd_discover(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    Checkpoint ckpt = load_checkpoint(checkpoint_path(cfg.output_dir, 1));
    const OpenWorldSplit split = build_split(cfg);
    DiscoveryState state =
        run_cdknet(ckpt.extractor, split.d_l, split.d_u_x, split.m_u, cfg.pipeline.stage2);
    save_checkpoint({ckpt.extractor, ckpt.head, cfg.pipeline.stage2.seed},
                    checkpoint_path(cfg.output_dir, 2));
    write_pseudo_labels_csv(state.pseudo_labels, pseudo_labels_path(cfg.output_dir));
    write_objective_history_csv(state.objective_history,
                                objective_history_path(cfg.output_dir));
    if (!state.objective_history.empty())
        std::printf("discover: objective %.6f -> %.6f over %zu epochs\n",
                    state.objective_history.front().second,
                    state.objective_history.back().second, cfg.pipeline.stage2.epochs);
}

void cmd_expand(const ExperimentConfig& cfg) {
    ensure_output_dir(cfg);
    Checkpoint ckpt = load_checkpoint(checkpoint_path(cfg.output_dir, 2));
    const std::vector<int> pseudo = read_pseudo_labels_csv(pseudo_labels_path(cfg.output_dir));
    const OpenWorldSplit split = build_split(cfg);
    if (cfg.pipeline.stage3.strategy == ExpansionStrategy::None) {
        std::printf("expand: strategy 'none', nothing to do\n");
        return;
    }
    const std::size_t latent_before = ckpt.extractor.latent_dim();
    Stage3Outcome out = run_stage3(split.d_l, split.d_u_x, pseudo, ckpt.extractor, ckpt.head,
                                   split.m_u, cfg.pipeline.stage3);
    save_checkpoint({out.extractor, out.head, cfg.pipeline.stage3.train.seed},
                    checkpoint_path(cfg.output_dir, 3));
    std::printf("expand: penultimate %zu -> %zu units, head %zu -> %zu outputs\n", latent_before,
                out.extractor.latent_dim(), ckpt.head.classes(), out.head.classes());
}

MetricsReport cmd_evaluate(const ExperimentConfig& cfg) {
    Checkpoint stage1 = load_checkpoint(checkpoint_path(cfg.output_dir, 1));
    Checkpoint stage3 = load_checkpoint(checkpoint_path(cfg.output_dir, 3));
    const OpenWorldSplit split = build_split(cfg);

    MetricsReport report;
    const std::vector<int> old_before = predict(stage1.extractor, stage1.head, split.d_l.x);
    report.old_acc_before = classification_accuracy(old_before, split.d_l.y);
    const std::vector<int> old_after = predict(stage3.extractor, stage3.head, split.d_l.x);
    report.old_acc_after = classification_accuracy(old_after, split.d_l.y);
    const std::vector<int> pred_u = predict(stage3.extractor, stage3.head, split.d_u_x);
    const std::vector<int> clusters = predictions_to_clusters(pred_u, split.m_l, split.m_u);
    report.acc = clustering_accuracy(clusters, split.d_u_truth);
    report.nmi = nmi(clusters, split.d_u_truth);
    report.ari = ari(clusters, split.d_u_truth);

    ensure_output_dir(cfg);
    atomic_write_text(metrics_path(cfg.output_dir), metrics_json(cfg, report).dump(2) + "\n");
    std::printf("evaluate: acc %.4f nmi %.4f ari %.4f old %.4f -> %.4f\n", report.acc, report.nmi,
                report.ari, report.old_acc_before, report.old_acc_after);
    return report;
}

std::string sweep_name(SweepKind sweep) {
    switch (sweep) {
        case SweepKind::Lambda: return "lambda";
        case SweepKind::Subsample: return "subsample";
        case SweepKind::ExpansionStrategy: return "expansion_strategy";
    }
    return "lambda";
}

std::vector<AblateRow> cmd_ablate(const ExperimentConfig& cfg, SweepKind sweep) {
    std::vector<std::string> values;
    switch (sweep) {
        case SweepKind::Lambda:
            values = cfg.ablate.lambda_values;
            break;
        case SweepKind::Subsample:
            for (double v : cfg.ablate.subsample_values) {
                std::ostringstream os;
                os << v;
                values.push_back(os.str());
            }
            break;
        case SweepKind::ExpansionStrategy:
            values = cfg.ablate.expansion_values;
            break;
    }
    if (values.empty())
        throw ConfigError("config: $.ablate." + sweep_name(sweep) +
                          ": sweep values must be listed in the config");
    std::vector<std::uint64_t> seeds = cfg.ablate.seeds;
    if (seeds.empty()) seeds = {cfg.master_seed};

    std::vector<AblateRow> rows;
    for (const std::string& value : values) {
        AblateRow row;
        row.value = value;
        for (std::uint64_t seed : seeds) {
            ExperimentConfig point = cfg;
            override_seed(point, seed);
            switch (sweep) {
                case SweepKind::Lambda:
                    if (value == "inf") {
                        point.pipeline.stage2.lambda_infinity = true;
                    } else {
                        point.pipeline.stage2.lambda_infinity = false;
                        point.pipeline.stage2.lambda = std::stod(value);
                    }
                    break;
                case SweepKind::Subsample: {
                    const double rate = std::stod(value);
                    if (rate == 0.0) {
                        point.pipeline.stage2.epochs = 0;  // SSCD: no refinement
                        point.pipeline.stage2.subsample_rate = 1.0;
                    } else {
                        point.pipeline.stage2.subsample_rate = rate;
                    }
                    break;
                }
                case SweepKind::ExpansionStrategy:
                    point.pipeline.stage3.strategy = parse_strategy(value, "$.ablate");
                    break;
            }
            const OpenWorldSplit split = build_split(point);
            const PipelineOutcome outcome = run_full_pipeline(split, point.pipeline);
            row.mean.acc += outcome.report.acc;
            row.mean.nmi += outcome.report.nmi;
            row.mean.ari += outcome.report.ari;
            row.mean.old_acc_before += outcome.report.old_acc_before;
            row.mean.old_acc_after += outcome.report.old_acc_after;
            row.cluster_nmi += outcome.cluster_nmi;
        }
        const double k = static_cast<double>(seeds.size());
        row.mean.acc /= k;
        row.mean.nmi /= k;
        row.mean.ari /= k;
        row.mean.old_acc_before /= k;
        row.mean.old_acc_after /= k;
        row.cluster_nmi /= k;
        rows.push_back(std::move(row));
    }

    ensure_output_dir(cfg);
    std::string body = "value,acc,nmi,ari,old_acc_before,old_acc_after,cluster_nmi\n";
    char buf[256];
    for (const AblateRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", row.value.c_str(),
                      row.mean.acc, row.mean.nmi, row.mean.ari, row.mean.old_acc_before,
                      row.mean.old_acc_after, row.cluster_nmi);
        body += buf;
    }
    atomic_write_text(cfg.output_dir + "/ablation_" + sweep_name(sweep) + ".csv", body);
    return rows;
}

}  // namespace cdknet
