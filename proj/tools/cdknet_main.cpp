// cdknet: three-stage open-world class discovery experiments.
//
//   cdknet <run|pretrain|discover|expand|evaluate|ablate> --config PATH
//          [--out DIR] [--seed N] [--sweep NAME]
//
// Exit codes: 0 success, 1 runtime failure (stage named on stderr),
// 2 invalid config, 3 missing prior-stage artifact.

#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cdknet/errors.hpp"
#include "cdknet/experiment.hpp"

namespace {

cdknet::ExperimentConfig load_with_overrides(const std::string& config_path,
                                             const std::optional<std::string>& out_dir,
                                             const std::optional<std::uint64_t>& seed) {
    cdknet::ExperimentConfig cfg = cdknet::load_experiment_config(config_path);
    if (out_dir) cdknet::override_output_dir(cfg, *out_dir);
    if (seed) cdknet::override_seed(cfg, *seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CD-KNet open-world class discovery pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::string sweep = "lambda";

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config JSON")->required();
        cmd->add_option("--out", out_dir, "override the output directory");
        cmd->add_option("--seed", seed, "override the master seed");
    };

    CLI::App* run = app.add_subcommand("run", "full three-stage pipeline");
    CLI::App* pre = app.add_subcommand("pretrain", "stage 1 only");
    CLI::App* dis = app.add_subcommand("discover", "stage 2 from a stage-1 checkpoint");
    CLI::App* exp = app.add_subcommand("expand", "stage 3 from a stage-2 checkpoint");
    CLI::App* eva = app.add_subcommand("evaluate", "recompute metrics from checkpoints");
    CLI::App* abl = app.add_subcommand("ablate", "sweep a parameter and tabulate metrics");
    for (CLI::App* cmd : {run, pre, dis, exp, eva, abl}) add_common(cmd);
    abl->add_option("--sweep", sweep, "lambda|subsample|expansion_strategy");

    CLI11_PARSE(app, argc, argv);

    try {
        const cdknet::ExperimentConfig cfg = load_with_overrides(config_path, out_dir, seed);
        if (run->parsed()) {
            const cdknet::RunResult result = cdknet::cmd_run(cfg);
            std::printf("run: acc %.4f nmi %.4f ari %.4f old %.4f -> %.4f\n", result.report.acc,
                        result.report.nmi, result.report.ari, result.report.old_acc_before,
                        result.report.old_acc_after);
        } else if (pre->parsed()) {
            cdknet::cmd_pretrain(cfg);
        } else if (dis->parsed()) {
            cdknet::cmd_discover(cfg);
        } else if (exp->parsed()) {
            cdknet::cmd_expand(cfg);
        } else if (eva->parsed()) {
            cdknet::cmd_evaluate(cfg);
        } else if (abl->parsed()) {
            cdknet::SweepKind kind;
            if (sweep == "lambda")
                kind = cdknet::SweepKind::Lambda;
            else if (sweep == "subsample")
                kind = cdknet::SweepKind::Subsample;
            else if (sweep == "expansion_strategy")
                kind = cdknet::SweepKind::ExpansionStrategy;
            else
                throw cdknet::ConfigError("unknown sweep '" + sweep + "'");
            const auto rows = cdknet::cmd_ablate(cfg, kind);
            for (const auto& row : rows)
                std::printf("ablate %s=%s: acc %.4f nmi %.4f ari %.4f\n",
                            cdknet::sweep_name(kind).c_str(), row.value.c_str(), row.mean.acc,
                            row.mean.nmi, row.mean.ari);
        }
        return 0;
    } catch (const cdknet::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const cdknet::MissingArtifact& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
