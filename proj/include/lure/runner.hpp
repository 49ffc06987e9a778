#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lure/config.hpp"

namespace lure {

/// One CSV row per mega-batch, columns in this order:
///   run_id,seed,strategy,megabatch,test_acc,err_count,cer,train_acc,val_acc,gap,ece,wall_s
extern const char* kMetricsCsvHeader;

std::string format_double(double v);

struct RunOutput {
    std::string run_dir;
    std::string run_id;
    ExperimentResult result;
};

/// Execute one seeded run and write the full artifact set into
/// <out_root>/run_<confighash8>_s<seed>/: resolved config, stream manifest,
/// metrics.csv, per-mega-batch checkpoints, mask archive, strategy log, the
/// optional robustness/perturbation/corruption/overlap series, and a
/// manifest.json inventory with content digests (written last).
RunOutput run_single(const ExperimentConfig& config, std::uint64_t master_seed,
                     const std::string& out_root);

/// Effective output root: --out flag, else config.output_dir, else the
/// LURE_OUT_ROOT environment variable, else ./runs.
std::string resolve_out_root(const ExperimentConfig& config, const std::string& cli_out);

struct CliOptions {
    std::string out_dir;          // --out
    std::uint64_t master_seed = 0; // --master-seed, 0 = keep config battery
    bool has_master_seed = false;
    std::size_t workers = 1; // --workers
};

/// `run <config>`: the whole seed battery. Returns a process exit code.
int cmd_run(const std::string& config_path, const CliOptions& options);

/// `sweep <config> --grid <file>`: cartesian product of the grid axes x
/// strategies x seeds, one run directory per cell/seed, plus aggregate.csv
/// (mean and std of the final-mega-batch metrics per cell).
int cmd_sweep(const std::string& config_path, const std::string& grid_path,
              const CliOptions& options);

/// `report <run_dirs...>`: digest-verified aggregation across finished runs.
int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

/// Digest of a file's bytes as 16 hex chars (FNV-1a 64).
std::string file_digest(const std::string& path);

/// Parsed-back metrics row used by report and the recount tooling.
struct MetricsRow {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string strategy;
    std::size_t megabatch = 0;
    double test_acc = 0.0;
    std::size_t err_count = 0;
    std::size_t cer = 0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double gap = 0.0;
    double ece = 0.0;
    double wall_s = 0.0;
};

std::vector<MetricsRow> read_metrics_csv(const std::string& path);

/// Verify every file listed in a run manifest against its recorded digest.
/// Returns the paths that failed (empty = clean).
std::vector<std::string> verify_run_dir(const std::string& run_dir);

} // namespace lure
