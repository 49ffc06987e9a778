#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lure/dataset.hpp"
#include "lure/metrics.hpp"
#include "lure/stream.hpp"
#include "lure/trainer.hpp"

namespace lure {

/// Full experiment description. Defaults are the reference protocol: 8
/// mega-batches, 50 epochs each at batch size 64, SGD momentum 0.9 with
/// weight decay 1e-4 and lr 0.1 stepped at epochs 20/40, subset fraction
/// 0.2, retention 0.8 with SNIP scores, full replay.
struct ExperimentConfig {
    struct DatasetSpec {
        std::string type = "synthetic"; // synthetic | idx | csv
        // synthetic
        int classes = 8;
        std::size_t per_class = 120;
        std::size_t dim = 16;
        double separation = 6.0;
        std::size_t test_per_class = 250;
        // idx
        std::string train_images, train_labels, test_images, test_labels;
        std::size_t limit = 0; // optional row cap on the idx train set
        // csv
        std::string train_csv, test_csv;
        std::string label_column = "label";
    };

    struct StreamSpec {
        std::size_t megabatches = 8;
        double val_fraction = 0.1;
        std::size_t per_class_cap = 0; // 0 = uncapped
        double label_noise = 0.0;
    };

    struct PgdSpec {
        std::vector<double> epsilons; // empty = skip
        std::size_t steps = 10;
        double step_size = 0.0; // 0 = 2.5*eps/steps
        bool clip01 = false;
        std::size_t samples = 0; // 0 = whole test set
    };

    struct CorruptionSpec {
        std::vector<std::string> kinds; // empty = skip
        std::vector<int> severities;
    };

    struct MetricsSpec {
        std::size_t ece_bins = 15;
        bool wall_time = false; // keep metrics.csv byte-reproducible by default
        PgdSpec pgd;
        std::vector<double> perturbation_sigmas; // empty = skip
        std::size_t perturbation_draws = 5;
        CorruptionSpec corruption;
        bool overlap = true;
    };

    int schema_version = 1;
    DatasetSpec dataset;
    StreamSpec stream;
    std::vector<std::size_t> hidden{64, 32};
    TrainConfig train; // seeds filled per run
    MetricsSpec metrics;
    std::vector<std::uint64_t> seeds{1};
    std::string output_dir;

    void validate() const;
};

/// Parse with strict unknown-key detection; errors name the offending field.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// Canonical resolved form: every field written out, keys sorted by nlohmann.
nlohmann::json resolved_config_json(const ExperimentConfig& config);

/// FNV-1a 64-bit over the canonical resolved dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string fnv1a64_hex(const std::string& bytes);

/// Materialized data for one run: source pipeline is cap -> label noise,
/// then the stream partition, all on the data seed stream.
struct ExperimentData {
    Dataset source; // after cap and label noise
    MegaBatchStream stream;
    NetworkSpec net_spec;
};

ExperimentData build_experiment_data(const ExperimentConfig& config, std::uint64_t data_seed);

} // namespace lure
