#include "lure/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "lure/checkpoint.hpp"
#include "lure/errors.hpp"
#include "parallel.hpp"

namespace lure {

namespace fs = std::filesystem;
using nlohmann::json;

const char* kMetricsCsvHeader =
    "run_id,seed,strategy,megabatch,test_acc,err_count,cer,train_acc,val_acc,gap,ece,wall_s";

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file for digest: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64_hex(ss.str());
}

std::string resolve_out_root(const ExperimentConfig& config, const std::string& cli_out) {
    if (!cli_out.empty()) return cli_out;
    if (!config.output_dir.empty()) return config.output_dir;
    if (const char* env = std::getenv("LURE_OUT_ROOT"); env && *env) return env;
    return "runs";
}

namespace {

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << content;
}

std::string metrics_csv_text(const std::string& run_id, std::uint64_t seed,
                             const std::string& strategy, const ExperimentConfig& config,
                             const std::vector<MetricsRecord>& records) {
    std::ostringstream out;
    out << kMetricsCsvHeader << "\n";
    for (const auto& r : records) {
        out << run_id << ',' << seed << ',' << strategy << ',' << r.megabatch_index << ','
            << format_double(r.test_accuracy) << ',' << r.error_count << ',' << r.cumulative_cer
            << ',' << format_double(r.train_accuracy) << ',' << format_double(r.val_accuracy) << ','
            << format_double(r.generalization_gap) << ',' << format_double(r.ece) << ','
            << format_double(config.metrics.wall_time ? r.wall_time_s : 0.0) << "\n";
    }
    return out.str();
}

/// Robustness series on the final model; all draws come from the metrics
/// seed stream so runs stay reproducible.
void write_probe_series(const fs::path& dir, const ExperimentConfig& config, ExperimentResult& result,
                        const Dataset& test, std::uint64_t metrics_seed,
                        std::vector<std::string>& files) {
    Rng metrics_rng(metrics_seed);
    Network& net = result.final_network;

    if (!config.metrics.pgd.epsilons.empty()) {
        Dataset target = test;
        if (config.metrics.pgd.samples > 0 && config.metrics.pgd.samples < test.size()) {
            std::vector<std::size_t> rows(config.metrics.pgd.samples);
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            target = test.select(rows);
        }
        const double clean = evaluate(net, target).accuracy;
        std::ostringstream out;
        out << "epsilon,adv_acc,clean_acc\n";
        for (double eps : config.metrics.pgd.epsilons) {
            PgdConfig attack;
            attack.epsilon = eps;
            attack.steps = config.metrics.pgd.steps;
            attack.step_size = config.metrics.pgd.step_size;
            attack.clip01 = config.metrics.pgd.clip01;
            const double adv = adversarial_accuracy(net, target, attack, metrics_rng);
            out << format_double(eps) << ',' << format_double(adv) << ',' << format_double(clean)
                << "\n";
        }
        write_text(dir / "robustness.csv", out.str());
        files.push_back("robustness.csv");
    }

    if (!config.metrics.perturbation_sigmas.empty()) {
        std::ostringstream out;
        out << "sigma,acc_mean,acc_std,draws\n";
        for (double sigma : config.metrics.perturbation_sigmas) {
            std::vector<double> accs;
            const std::size_t draws = sigma == 0.0 ? 1 : config.metrics.perturbation_draws;
            for (std::size_t d = 0; d < draws; ++d) {
                Network noisy = perturb_parameters(net, sigma, metrics_rng);
                accs.push_back(evaluate(noisy, test).accuracy);
            }
            double mean = 0.0;
            for (double a : accs) mean += a;
            mean /= static_cast<double>(accs.size());
            double var = 0.0;
            for (double a : accs) var += (a - mean) * (a - mean);
            const double stddev = accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;
            out << format_double(sigma) << ',' << format_double(mean) << ',' << format_double(stddev)
                << ',' << draws << "\n";
        }
        write_text(dir / "perturbation.csv", out.str());
        files.push_back("perturbation.csv");
    }

    if (!config.metrics.corruption.kinds.empty() && !config.metrics.corruption.severities.empty()) {
        std::ostringstream out;
        out << "kind,severity,accuracy\n";
        double total = 0.0;
        std::size_t cells = 0;
        for (const auto& kind_name : config.metrics.corruption.kinds) {
            const CorruptionKind kind = corruption_kind_from_name(kind_name);
            for (int severity : config.metrics.corruption.severities) {
                Dataset corrupted = test;
                corrupted.inputs = corrupt_inputs(test.inputs, kind, severity, metrics_rng);
                const double acc = evaluate(net, corrupted).accuracy;
                total += acc;
                ++cells;
                out << kind_name << ',' << severity << ',' << format_double(acc) << "\n";
            }
        }
        write_text(dir / "corruption.csv", out.str());
        files.push_back("corruption.csv");
        json mca;
        mca["mca"] = total / static_cast<double>(cells);
        write_text(dir / "corruption_summary.json", mca.dump(2) + "\n");
        files.push_back("corruption_summary.json");
    }

    if (config.metrics.overlap && result.masks.size() >= 2) {
        std::ostringstream out;
        out << "pair,layer,overlap_pct\n";
        for (std::size_t p = 0; p + 1 < result.masks.size(); ++p) {
            const OverlapReport report =
                mask_overlap(result.masks[p], result.masks[p + 1], result.layer_ranges);
            for (const auto& layer : report.layers) {
                out << (p + 1) << "->" << (p + 2) << ',' << layer.layer << ',';
                if (layer.overlap_pct) out << format_double(*layer.overlap_pct);
                out << "\n";
            }
        }
        write_text(dir / "overlap.csv", out.str());
        files.push_back("overlap.csv");
    }
}

} // namespace

RunOutput run_single(const ExperimentConfig& config, std::uint64_t master_seed,
                     const std::string& out_root) {
    const std::string hash = config_hash(config);
    const std::string run_id = hash.substr(0, 8) + "-s" + std::to_string(master_seed);
    const fs::path dir = fs::path(out_root) / ("run_" + hash.substr(0, 8) + "_s" + std::to_string(master_seed));
    fs::create_directories(dir / "checkpoints");
    fs::create_directories(dir / "masks");

    const SeedStreams seeds = SeedStreams::from_master(master_seed);
    ExperimentData data = build_experiment_data(config, seeds.data);

    TrainConfig train = config.train;
    train.seeds = seeds;
    train.ece_bins = config.metrics.ece_bins;

    RunOutput out;
    out.run_dir = dir.string();
    out.run_id = run_id;
    out.result = run_alma(data.stream, data.net_spec, train);

    std::vector<std::string> files;
    write_text(dir / "config.resolved.json", resolved_config_json(config).dump(2) + "\n");
    files.push_back("config.resolved.json");

    save_stream_manifest((dir / "stream_manifest.json").string(), data.stream, data.source.size());
    files.push_back("stream_manifest.json");

    write_text(dir / "metrics.csv",
               metrics_csv_text(run_id, master_seed, train.strategy.name(), config, out.result.records));
    files.push_back("metrics.csv");

    for (std::size_t i = 0; i < out.result.checkpoints.size(); ++i) {
        char name[48];
        std::snprintf(name, sizeof(name), "checkpoints/ckpt_%04zu.bin", i + 1);
        save_checkpoint((dir / name).string(), data.net_spec, out.result.checkpoints[i],
                        /*include_momentum=*/false);
        files.push_back(name);
    }
    for (std::size_t i = 0; i < out.result.masks.size(); ++i) {
        char name[40];
        std::snprintf(name, sizeof(name), "masks/mask_%04zu.bin", i + 1);
        save_mask((dir / name).string(), out.result.masks[i], train.strategy.method, i + 1);
        files.push_back(name);
    }

    {
        std::ostringstream log;
        for (const auto& app : out.result.applications) {
            log << "megabatch=" << app.megabatch_index << " strategy=" << app.strategy
                << " modified=" << app.modified_params << "\n";
        }
        write_text(dir / "strategy.log", log.str());
        files.push_back("strategy.log");
    }

    write_probe_series(dir, config, out.result, data.stream.test, seeds.metrics, files);

    json manifest;
    manifest["artifact_version"] = "1.0.0";
    manifest["config_hash"] = hash;
    manifest["seed"] = master_seed;
    manifest["run_id"] = run_id;
    manifest["files"] = json::array();
    for (const auto& rel : files) {
        json f;
        f["path"] = rel;
        f["digest"] = file_digest((dir / rel).string());
        f["bytes"] = fs::file_size(dir / rel);
        manifest["files"].push_back(std::move(f));
    }
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    return out;
}

std::vector<std::string> verify_run_dir(const std::string& run_dir) {
    const fs::path dir(run_dir);
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ParseError("missing manifest.json in " + run_dir);
    json manifest;
    in >> manifest;
    std::vector<std::string> bad;
    for (const auto& f : manifest.at("files")) {
        const std::string rel = f.at("path").get<std::string>();
        const fs::path p = dir / rel;
        if (!fs::exists(p) || file_digest(p.string()) != f.at("digest").get<std::string>()) {
            bad.push_back(p.string());
        }
    }
    return bad;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open metrics csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty metrics csv");
    if (line != kMetricsCsvHeader) throw ParseError(path + ": unexpected metrics header");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 12) throw ParseError(path + ": malformed row \"" + line + "\"");
        MetricsRow r;
        r.run_id = cells[0];
        r.seed = std::stoull(cells[1]);
        r.strategy = cells[2];
        r.megabatch = std::stoul(cells[3]);
        r.test_acc = std::stod(cells[4]);
        r.err_count = std::stoul(cells[5]);
        r.cer = std::stoul(cells[6]);
        r.train_acc = std::stod(cells[7]);
        r.val_acc = std::stod(cells[8]);
        r.gap = std::stod(cells[9]);
        r.ece = std::stod(cells[10]);
        r.wall_s = std::stod(cells[11]);
        rows.push_back(std::move(r));
    }
    return rows;
}

int cmd_run(const std::string& config_path, const CliOptions& options) {
    ExperimentConfig config;
    try {
        config = load_experiment_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    std::vector<std::uint64_t> battery = config.seeds;
    if (options.has_master_seed) battery = {options.master_seed};
    const std::string out_root = resolve_out_root(config, options.out_dir);
    try {
        detail::run_parallel(battery.size(), options.workers, [&](std::size_t i) {
            const RunOutput out = run_single(config, battery[i], out_root);
            std::ostringstream msg;
            msg << "run " << out.run_id << " -> " << out.run_dir << " ("
                << out.result.records.size() << " mega-batches, final acc "
                << format_double(out.result.records.back().test_accuracy) << ")\n";
            std::cout << msg.str();
        });
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace lure
