// Command-line pipeline: detect -> featurize -> label -> train -> evaluate
// -> report, plus a synthetic-corpus generator for offline runs.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "rulsurv/pipeline.hpp"

namespace {

struct CliOverrides {
    std::optional<std::string> config_path;
    std::optional<std::string> dataset_root;
    std::optional<std::string> condition;
    std::optional<std::string> out_dir;
    std::optional<std::string> model;
    std::optional<double> censoring;
    std::optional<std::uint64_t> seed;
};

rulsurv::RunConfig resolve_config(const CliOverrides& cli) {
    rulsurv::RunConfig cfg;
    if (cli.config_path) cfg = rulsurv::load_run_config(*cli.config_path);
    if (cli.dataset_root) cfg.dataset_root = *cli.dataset_root;
    if (cli.condition) cfg.condition = *cli.condition;
    if (cli.out_dir) cfg.out_dir = *cli.out_dir;
    if (cli.model) cfg.model = *cli.model;
    if (cli.censoring) cfg.censor_pct = *cli.censoring;
    if (cli.seed) cfg.seed = *cli.seed;
    return cfg;
}

void print_stage_result(const std::string& stage, const rulsurv::StageResult& result) {
    for (const auto& out : result.outputs) std::cout << stage << ": wrote " << out << "\n";
    for (const auto& failure : result.failures) {
        std::cerr << stage << ": skipped " << failure << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bearing degradation annotation and censoring-aware RUL estimation"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    CliOverrides cli;
    app.add_option("--config", cli.config_path, "JSON config file")
        ->check(CLI::ExistingFile);
    app.add_option("--root", cli.dataset_root, "dataset root directory");
    app.add_option("--condition", cli.condition, "operating condition (C1/C2/C3)");
    app.add_option("--out", cli.out_dir, "output directory");
    app.add_option("--model", cli.model, "model selector (km/cox/rsf/mtlr)");
    app.add_option("--censoring", cli.censoring, "censoring fraction in [0, 1)");
    app.add_option("--seed", cli.seed, "random seed");

    auto* synth = app.add_subcommand("synth", "generate the bundled synthetic corpus");
    auto* detect = app.add_subcommand("detect", "annotate degradation onset per bearing");
    auto* featurize = app.add_subcommand("featurize", "extract per-minute time-domain features");
    auto* label = app.add_subcommand("label", "build the supervised survival dataset");
    auto* train = app.add_subcommand("train", "fit a survival model on the labeled dataset");
    auto* evaluate = app.add_subcommand("evaluate", "cross-validated evaluation report");
    auto* report = app.add_subcommand("report", "emit plot-data bundles");

    CLI11_PARSE(app, argc, argv);

    try {
        const rulsurv::RunConfig cfg = resolve_config(cli);
        if (synth->parsed()) {
            print_stage_result("synth", rulsurv::cmd_synth(cfg));
        } else if (detect->parsed()) {
            const auto result = rulsurv::cmd_detect(cfg);
            print_stage_result("detect", result);
            if (result.outputs.empty()) {
                std::cerr << "detect: no bearing produced an annotation\n";
                return 1;
            }
        } else if (featurize->parsed()) {
            print_stage_result("featurize", rulsurv::cmd_featurize(cfg));
        } else if (label->parsed()) {
            print_stage_result("label", rulsurv::cmd_label(cfg));
        } else if (train->parsed()) {
            print_stage_result("train", rulsurv::cmd_train(cfg));
        } else if (evaluate->parsed()) {
            const auto rep = rulsurv::cmd_evaluate(cfg);
            for (const auto& [name, ms] : rep.aggregate) {
                std::printf("%-12s %8.2f +- %.2f\n", name.c_str(), ms.first, ms.second);
            }
        } else if (report->parsed()) {
            print_stage_result("report", rulsurv::cmd_report(cfg));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
