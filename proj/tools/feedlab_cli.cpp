// Command-line entry point: simulate, analyze, report.

#include "feedlab/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"feedlab: sockpuppet audits of a simulated recommender feed"};
    app.require_subcommand(1);

    feedlab::SimulateOptions sim;
    std::uint64_t seed = 0;
    auto* simulate = app.add_subcommand("simulate", "run every puppet of a configured trial and write logs");
    simulate->add_option("--config", sim.config, "experiment configuration (INI)")->required();
    simulate->add_option("--out", sim.out, "output directory (default: experiment.output_dir)");
    auto* seed_opt = simulate->add_option("--seed", seed, "override experiment.seed");
    simulate->add_option("--jobs", sim.jobs, "worker threads")->check(CLI::PositiveNumber);

    feedlab::AnalyzeOptions ana;
    auto* analyze = app.add_subcommand("analyze", "estimate effects from a log directory");
    analyze->add_option("logdir", ana.log_dir, "directory written by simulate")->required();
    analyze->add_option("--out", ana.out, "analysis directory (default: LOGDIR/analysis)");
    analyze->add_option("--alpha", ana.alpha, "significance level")->check(CLI::Range(0.0, 1.0));
    analyze->add_option("--jobs", ana.jobs, "worker threads")->check(CLI::PositiveNumber);

    std::filesystem::path report_dir;
    auto* report = app.add_subcommand("report", "summarize an analysis directory");
    report->add_option("dir", report_dir, "directory written by analyze")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? feedlab::kExitOk : feedlab::kExitValidation;
    }

    if (*simulate) {
        if (*seed_opt) sim.seed = seed;
        return feedlab::cmd_simulate(sim, std::cout, std::cerr);
    }
    if (*analyze) return feedlab::cmd_analyze(ana, std::cout, std::cerr);
    return feedlab::cmd_report(report_dir, std::cout, std::cerr);
}
