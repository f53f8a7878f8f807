#include "mobility/config.hpp"
#include "mobility/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

using namespace mobility;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;
};

PipelineOptions make_options(const GlobalArgs& args) {
    PipelineOptions opts;
    opts.cfg = RunConfig::load(args.config_path);
    if (args.seed_set) opts.cfg.world.rng_seed = args.seed;
    opts.out_dir = args.out_dir;
    opts.jobs = args.jobs;
    return opts;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mobility prediction experiment pipeline"};
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "path to the key = value config file")
        ->required();
    app.add_option("--out", args.out_dir, "run directory for all artifacts")->required();
    auto* seed_opt = app.add_option("--seed", args.seed, "override world.rng_seed");
    app.add_option("--jobs", args.jobs, "worker threads for sweep / k-means fits")
        ->check(CLI::PositiveNumber);

    auto* generate = app.add_subcommand("generate", "synthesize the world (geo + usage events)");
    auto* prepare = app.add_subcommand(
        "prepare", "cluster granularities, extract trajectories, simulate and label queries");
    auto* train = app.add_subcommand("train", "train one scenario cell");
    auto* evaluate = app.add_subcommand("evaluate", "merge cell results into results.csv");
    auto* sweep = app.add_subcommand("sweep", "train and evaluate the full scenario grid");
    auto* report = app.add_subcommand("report", "print the run's tables");

    std::string train_model = "markov";
    int train_m = 25;
    std::string train_criterion = "successive";
    std::string train_groups = "none";
    train->add_option("--model", train_model, "markov|lstm|forest_single|fusion_a|fusion_b|fusion_c");
    train->add_option("--m", train_m, "location granularity");
    train->add_option("--criterion", train_criterion, "successive|important@K|longest@K");
    train->add_option("--groups", train_groups, "feature groups, e.g. app or app+sensor or all");

    CLI11_PARSE(app, argc, argv);
    args.seed_set = seed_opt->count() > 0;

    try {
        if (*generate) {
            cmd_generate(make_options(args));
        } else if (*prepare) {
            cmd_prepare(make_options(args));
        } else if (*train) {
            CellSpec cell;
            cell.model = parse_model_kind(train_model);
            cell.m = train_m;
            cell.criterion = TargetCriterion::parse(train_criterion);
            std::string groups = train_groups;
            std::replace(groups.begin(), groups.end(), '+', ',');
            cell.groups = FeatureGroupSet::parse(groups);
            cmd_train(make_options(args), cell);
        } else if (*evaluate) {
            cmd_evaluate(make_options(args));
        } else if (*sweep) {
            const SweepStats stats = cmd_sweep(make_options(args));
            std::printf("sweep: computed %d cells, skipped %d\n", stats.computed, stats.skipped);
        } else if (*report) {
            std::fputs(cmd_report(args.out_dir).c_str(), stdout);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
