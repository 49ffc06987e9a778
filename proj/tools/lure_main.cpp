#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lure/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Anytime-learning lab: mega-batch training with selective reinitialization"};
    app.require_subcommand(1);

    lure::CliOptions options;
    std::string config_path, grid_path, report_out = "report";
    std::vector<std::string> run_dirs;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", options.out_dir, "Output root (overrides config and LURE_OUT_ROOT)");
        cmd->add_option("--workers", options.workers, "Parallel worker count")->check(CLI::PositiveNumber);
        cmd->add_option("--master-seed", options.master_seed,
                        "Replace the config seed battery with this single master seed")
            ->each([&](const std::string&) { options.has_master_seed = true; });
    };

    CLI::App* run = app.add_subcommand("run", "Execute one experiment config over its seed battery");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    add_common(run);

    CLI::App* sweep = app.add_subcommand("sweep", "Cartesian hyperparameter sweep");
    sweep->add_option("config", config_path, "Base experiment config (JSON)")->required();
    sweep->add_option("--grid", grid_path, "Grid file (JSON object of axis -> values)")->required();
    add_common(sweep);

    CLI::App* report = app.add_subcommand("report", "Aggregate finished run directories");
    report->add_option("dirs", run_dirs, "Run directories")->required();
    report->add_option("--out", report_out, "Report output directory");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return lure::cmd_run(config_path, options);
    if (sweep->parsed()) return lure::cmd_sweep(config_path, grid_path, options);
    return lure::cmd_report(run_dirs, report_out);
}
