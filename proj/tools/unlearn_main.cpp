// Experiment driver. Subcommands mirror the experiment runners; every run is
// fully determined by the config file plus the master seed.
//
// Exit codes: 0 success, 2 validation/config error, 3 solver or divergence
// error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "unlearn/unlearn.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string mode;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", args.out_dir, "output directory (overrides config)");
    sub->add_option("--mode", args.mode, "multiplier extraction: plain|thresholded");
    sub->add_option("--seed", args.seed, "master seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
}

int run(const std::string& name, const CommonArgs& args) {
    unlearn::json cj = unlearn::parse_json_file(args.config_path);
    if (args.seed_set) cj["seed"] = args.seed;
    unlearn::ExperimentConfig cfg = unlearn::config_from_json(cj);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.mode.empty()) cfg.mode = unlearn::multiplier_mode_from_string(args.mode);
    cfg.experiment = name;

    const unlearn::RunOutcome out = unlearn::run_experiment(cfg, name);
    if (cfg.out_dir.empty())
        std::cout << out.record.dump(2) << "\n";
    else
        std::cout << name << ": wrote " << cfg.out_dir << "/run.json\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gradient-ascent unlearning experiments for margin-maximizing predictors"};
    app.require_subcommand(1);

    const char* names[] = {"gen",   "train", "certify",    "unlearn",
                           "sweep", "batch", "generalize", "pipeline"};
    CommonArgs args;
    for (const char* name : names) add_common(app.add_subcommand(name), args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        return run(name, args);
    } catch (const unlearn::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const unlearn::SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
