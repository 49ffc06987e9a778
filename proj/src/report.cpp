#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "lure/errors.hpp"
#include "lure/runner.hpp"
#include "parallel.hpp"

namespace lure {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Stats {
    double mean = 0.0;
    double stddev = 0.0; // sample std, 0 for a single value
    std::size_t n = 0;
};

Stats stats_of(const std::vector<double>& values) {
    Stats s;
    s.n = values.size();
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double var = 0.0;
        for (double v : values) var += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(var / static_cast<double>(values.size() - 1));
    }
    return s;
}

/// Final-mega-batch row of each run, grouped by strategy name.
struct RunSummary {
    std::string strategy;
    double final_acc = 0.0;
    double final_cer = 0.0;
    double final_gap = 0.0;
};

RunSummary summarize_run(const std::vector<MetricsRow>& rows) {
    if (rows.empty()) throw ParseError("metrics csv has no rows");
    const MetricsRow& last = rows.back();
    return {last.strategy, last.test_acc, static_cast<double>(last.cer), last.gap};
}

void append_file_with_run_id(std::ostringstream& out, const fs::path& src, const std::string& run_id,
                             bool& wrote_header) {
    std::ifstream in(src);
    if (!in) return;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            if (!wrote_header) {
                out << "run_id," << line << "\n";
                wrote_header = true;
            }
            first = false;
            continue;
        }
        out << run_id << ',' << line << "\n";
    }
}

} // namespace

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    if (run_dirs.empty()) {
        std::cerr << "report: no run directories given\n";
        return 2;
    }
    for (const auto& dir : run_dirs) {
        if (!fs::exists(fs::path(dir) / "manifest.json")) {
            std::cerr << "report: missing run directory or manifest: " << dir << "\n";
            return 2;
        }
    }
    // Refuse anything whose inventory no longer matches its digests.
    for (const auto& dir : run_dirs) {
        const std::vector<std::string> bad = verify_run_dir(dir);
        if (!bad.empty()) {
            std::cerr << "report: digest mismatch in " << dir << ":\n";
            for (const auto& p : bad) std::cerr << "  " << p << "\n";
            return 2;
        }
    }

    std::map<std::string, std::vector<RunSummary>> by_strategy;
    std::ostringstream acc_series;
    acc_series << "run_id,seed,strategy,megabatch,test_acc\n";
    std::ostringstream overlap_series, sigma_series, eps_series;
    bool overlap_header = false, sigma_header = false, eps_header = false;

    for (const auto& dir : run_dirs) {
        const std::vector<MetricsRow> rows = read_metrics_csv((fs::path(dir) / "metrics.csv").string());
        const RunSummary summary = summarize_run(rows);
        by_strategy[summary.strategy].push_back(summary);
        for (const auto& r : rows) {
            acc_series << r.run_id << ',' << r.seed << ',' << r.strategy << ',' << r.megabatch << ','
                       << format_double(r.test_acc) << "\n";
        }
        const std::string run_id = rows.front().run_id;
        append_file_with_run_id(overlap_series, fs::path(dir) / "overlap.csv", run_id, overlap_header);
        append_file_with_run_id(sigma_series, fs::path(dir) / "perturbation.csv", run_id, sigma_header);
        append_file_with_run_id(eps_series, fs::path(dir) / "robustness.csv", run_id, eps_header);
    }

    fs::create_directories(out_dir);
    auto write = [&](const char* name, const std::string& content) {
        std::ofstream out(fs::path(out_dir) / name);
        if (!out) throw ParseError(std::string("cannot write report file ") + name);
        out << content;
    };

    // Strategy x metric table. Accuracy and gap are percentage points.
    std::ostringstream csv, txt;
    csv << "strategy,runs,test_acc_mean,test_acc_std,cer_mean,cer_std,gap_mean,gap_std\n";
    txt << std::left << std::setw(16) << "strategy" << std::right << std::setw(6) << "runs"
        << std::setw(18) << "test_acc(%)" << std::setw(14) << "CER" << std::setw(14) << "gap(pp)"
        << "\n";
    for (const auto& [strategy, summaries] : by_strategy) {
        std::vector<double> accs, cers, gaps;
        for (const auto& s : summaries) {
            accs.push_back(100.0 * s.final_acc);
            cers.push_back(s.final_cer);
            gaps.push_back(100.0 * s.final_gap);
        }
        const Stats acc = stats_of(accs), cer_stats = stats_of(cers), gap = stats_of(gaps);
        csv << strategy << ',' << summaries.size() << ',' << format_double(acc.mean) << ','
            << format_double(acc.stddev) << ',' << format_double(cer_stats.mean) << ','
            << format_double(cer_stats.stddev) << ',' << format_double(gap.mean) << ','
            << format_double(gap.stddev) << "\n";
        std::ostringstream acccell;
        acccell << std::fixed << std::setprecision(2) << acc.mean << " +/- " << acc.stddev;
        txt << std::left << std::setw(16) << strategy << std::right << std::setw(6) << summaries.size()
            << std::setw(18) << acccell.str() << std::setw(14) << std::fixed << std::setprecision(1)
            << cer_stats.mean << std::setw(14) << std::setprecision(2) << gap.mean << "\n";
    }
    write("summary.csv", csv.str());
    write("summary.txt", txt.str());
    write("accuracy_vs_megabatch.csv", acc_series.str());
    if (overlap_header) write("overlap_vs_layer.csv", overlap_series.str());
    if (sigma_header) write("accuracy_vs_sigma.csv", sigma_series.str());
    if (eps_header) write("accuracy_vs_epsilon.csv", eps_series.str());

    std::cout << txt.str();
    return 0;
}

namespace {

struct SweepAxis {
    std::string name;
    std::vector<json> values;
};

void apply_override(ExperimentConfig& config, const std::string& axis, const json& value) {
    if (axis == "lr") {
        config.train.optimizer.learning_rate = value.get<double>();
    } else if (axis == "weight_decay") {
        config.train.optimizer.weight_decay = value.get<double>();
    } else if (axis == "retain") {
        config.train.strategy.retention = value.get<double>();
    } else if (axis == "importance") {
        config.train.strategy.method = importance_method_from_name(value.get<std::string>());
    } else if (axis == "label_noise") {
        config.stream.label_noise = value.get<double>();
    } else if (axis == "buffer") {
        config.train.replay = ReplayPolicy::buffered(value.get<std::size_t>());
    } else if (axis == "strategy") {
        json s = resolved_config_json(config)["strategy"];
        s["name"] = value.get<std::string>();
        json wrap;
        wrap["schema_version"] = 1;
        wrap["strategy"] = s;
        config.train.strategy = parse_experiment_config(wrap).train.strategy;
    } else {
        throw ConfigError("sweep grid: unknown axis \"" + axis + "\"");
    }
}

std::string cell_label(const std::vector<SweepAxis>& axes, const std::vector<std::size_t>& pick) {
    std::ostringstream out;
    for (std::size_t a = 0; a < axes.size(); ++a) {
        if (a) out << ' ';
        const json& v = axes[a].values[pick[a]];
        out << axes[a].name << '=' << (v.is_string() ? v.get<std::string>() : v.dump());
    }
    return out.str();
}

} // namespace

int cmd_sweep(const std::string& config_path, const std::string& grid_path,
              const CliOptions& options) {
    ExperimentConfig base;
    json grid;
    try {
        base = load_experiment_config(config_path);
        std::ifstream in(grid_path);
        if (!in) throw ConfigError("cannot open grid file: " + grid_path);
        in >> grid;
        if (!grid.is_object()) throw ConfigError("grid file must be a JSON object");
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    std::vector<SweepAxis> axes;
    for (const auto& item : grid.items()) {
        if (item.key() == "strategies") {
            SweepAxis axis{"strategy", {}};
            for (const auto& v : item.value()) axis.values.push_back(v);
            axes.push_back(std::move(axis));
            continue;
        }
        if (!item.value().is_array()) {
            std::cerr << "config error: grid axis \"" << item.key() << "\" must be an array\n";
            return 2;
        }
        SweepAxis axis{item.key(), {}};
        for (const auto& v : item.value()) axis.values.push_back(v);
        axes.push_back(std::move(axis));
    }
    axes.erase(std::remove_if(axes.begin(), axes.end(),
                              [](const SweepAxis& a) { return a.values.empty(); }),
               axes.end());
    if (axes.empty()) {
        std::cerr << "config error: sweep grid is empty\n";
        return 2;
    }

    // Cartesian product over axes; each cell runs the whole seed battery.
    std::vector<std::vector<std::size_t>> cells;
    std::vector<std::size_t> pick(axes.size(), 0);
    for (;;) {
        cells.push_back(pick);
        std::size_t a = 0;
        for (; a < axes.size(); ++a) {
            if (++pick[a] < axes[a].values.size()) break;
            pick[a] = 0;
        }
        if (a == axes.size()) break;
    }

    std::vector<std::uint64_t> battery = base.seeds;
    if (options.has_master_seed) battery = {options.master_seed};
    const std::string out_root = resolve_out_root(base, options.out_dir);

    struct Job {
        std::size_t cell;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (std::uint64_t seed : battery) jobs.push_back({c, seed});
    }

    std::vector<ExperimentConfig> cell_configs;
    cell_configs.reserve(cells.size());
    for (const auto& cell : cells) {
        ExperimentConfig cfg = base;
        try {
            for (std::size_t a = 0; a < axes.size(); ++a) {
                apply_override(cfg, axes[a].name, axes[a].values[cell[a]]);
            }
            cfg.validate();
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
        cell_configs.push_back(std::move(cfg));
    }

    std::vector<std::string> run_dirs(jobs.size());
    try {
        detail::run_parallel(jobs.size(), options.workers, [&](std::size_t i) {
            const RunOutput out = run_single(cell_configs[jobs[i].cell], jobs[i].seed, out_root);
            run_dirs[i] = out.run_dir;
            std::ostringstream msg;
            msg << "cell [" << cell_label(axes, cells[jobs[i].cell]) << "] seed " << jobs[i].seed
                << " -> " << out.run_dir << "\n";
            std::cout << msg.str();
        });
    } catch (const std::exception& e) {
        std::cerr << "sweep failed: " << e.what() << "\n";
        return 1;
    }

    // Aggregate: one row per cell with mean/std of the final-mega-batch
    // metrics over the seed battery.
    std::ostringstream agg;
    agg << "cell,strategy,runs,test_acc_mean,test_acc_std,cer_mean,cer_std,gap_mean,gap_std\n";
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> accs, cers, gaps;
        std::string strategy;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].cell != c) continue;
            const auto rows = read_metrics_csv((fs::path(run_dirs[i]) / "metrics.csv").string());
            const RunSummary s = summarize_run(rows);
            strategy = s.strategy;
            accs.push_back(100.0 * s.final_acc);
            cers.push_back(s.final_cer);
            gaps.push_back(100.0 * s.final_gap);
        }
        const Stats acc = stats_of(accs), cer_stats = stats_of(cers), gap = stats_of(gaps);
        agg << '"' << cell_label(axes, cells[c]) << "\"," << strategy << ',' << accs.size() << ','
            << format_double(acc.mean) << ',' << format_double(acc.stddev) << ','
            << format_double(cer_stats.mean) << ',' << format_double(cer_stats.stddev) << ','
            << format_double(gap.mean) << ',' << format_double(gap.stddev) << "\n";
    }
    fs::create_directories(out_root);
    const fs::path agg_path = fs::path(out_root) / "aggregate.csv";
    std::ofstream out(agg_path);
    out << agg.str();
    std::cout << "aggregate -> " << agg_path.string() << "\n";
    return 0;
}

} // namespace lure
