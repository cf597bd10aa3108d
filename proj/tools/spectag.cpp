// spectag: uncertainty-aware superpixel classification and image tagging for
// multispectral / RGB stacks.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "spectag/spectag.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitDataError = 3;
constexpr int kExitNumericError = 4;

struct CommonArgs {
    std::string manifest;
    std::string config;
    std::string model;
    std::string out;
    std::string metric;
    double tau = -1.0;
    bool compare_rgb = false;
    std::optional<uint64_t> seed;
    int jobs = -1;
};

spectag::PipelineConfig resolve_config(const CommonArgs& args) {
    spectag::PipelineConfig cfg;
    if (!args.config.empty()) cfg = spectag::load_config(args.config);
    if (!args.metric.empty()) cfg.metric = spectag::metric_from_name(args.metric);
    if (args.tau >= 0.0) {
        if (args.tau >= 1.0) throw spectag::ConfigError("--tau must lie in [0, 1)");
        cfg.tau = args.tau;
    }
    if (args.seed) cfg.seed = *args.seed;
    if (args.jobs >= 0) cfg.jobs = args.jobs;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uncertainty-aware superpixel classification and image tagging"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string synth_spec;
    std::string features_split = "train";
    double loo_tau = 0.9;

    auto add_common = [&](CLI::App* cmd, bool with_model) {
        cmd->add_option("--manifest", args.manifest, "Dataset manifest JSON")->required();
        cmd->add_option("--config", args.config, "Pipeline config file");
        if (with_model) cmd->add_option("--model", args.model, "Model file");
        cmd->add_option("--metric", args.metric, "Confidence metric (gc, ppci, max)");
        cmd->add_option("--tau", args.tau, "Confidence threshold in [0,1)");
        cmd->add_option("--seed", [&](const CLI::results_t& r) {
            args.seed = std::stoull(r[0]);
            return true;
        }, "Seed override");
        cmd->add_option("--jobs", args.jobs, "Worker threads (0 = all cores)");
    };

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic phantom dataset");
    synth->add_option("--spec", synth_spec, "Phantom dataset spec JSON (defaults built in)");
    synth->add_option("--out", args.out, "Output dataset directory")->required();
    synth->add_option("--seed", [&](const CLI::results_t& r) {
        args.seed = std::stoull(r[0]);
        return true;
    }, "Seed override");
    synth->add_option("--jobs", args.jobs, "Worker threads (0 = all cores)");

    CLI::App* train = app.add_subcommand("train", "Train the classifier on the train split");
    add_common(train, true);
    train->add_flag("--compare-rgb", args.compare_rgb,
                    "Also train an RGB model on the simulated-RGB bands");

    CLI::App* eval = app.add_subcommand("eval", "Evaluate on the test split");
    add_common(eval, true);
    eval->add_option("--out", args.out, "Report output directory")->required();
    eval->add_flag("--compare-rgb", args.compare_rgb, "Also evaluate the RGB model");

    CLI::App* loo = app.add_subcommand("loo", "Leave-one-organ-out confidence study");
    add_common(loo, true);
    loo->add_option("--out", args.out, "Report output file")->required();
    loo->add_option("--loo-tau", loo_tau, "Low-confidence threshold (default 0.9)");

    CLI::App* sweep = app.add_subcommand("sweep", "Emit the tau-sweep table only");
    add_common(sweep, true);
    sweep->add_option("--out", args.out, "Sweep CSV output path")->required();

    CLI::App* feats = app.add_subcommand("features", "Dump per-superpixel features as CSV");
    add_common(feats, false);
    feats->add_option("--split", features_split, "Split to dump (train or test)");
    feats->add_option("--out", args.out, "CSV output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    try {
        if (synth->parsed()) {
            std::optional<spectag::fs::path> spec_path;
            if (!synth_spec.empty()) spec_path = synth_spec;
            int jobs = args.jobs >= 0 ? args.jobs : 0;
            spectag::cmd_synth(spec_path, args.out, args.seed, jobs);
        } else if (train->parsed()) {
            if (args.model.empty()) throw spectag::ConfigError("train: --model is required");
            spectag::cmd_train(args.manifest, resolve_config(args), args.model,
                               args.compare_rgb);
        } else if (eval->parsed()) {
            if (args.model.empty()) throw spectag::ConfigError("eval: --model is required");
            spectag::cmd_eval(args.manifest, resolve_config(args), args.model, args.out,
                              args.compare_rgb);
        } else if (loo->parsed()) {
            std::optional<spectag::fs::path> model_path;
            if (!args.model.empty()) model_path = args.model;
            spectag::cmd_loo(args.manifest, resolve_config(args), model_path, args.out, loo_tau);
        } else if (sweep->parsed()) {
            if (args.model.empty()) throw spectag::ConfigError("sweep: --model is required");
            spectag::cmd_sweep(args.manifest, resolve_config(args), args.model, args.out);
        } else if (feats->parsed()) {
            spectag::cmd_features(args.manifest, resolve_config(args), features_split, args.out);
        }
    } catch (const spectag::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const spectag::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitDataError;
    } catch (const spectag::NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
