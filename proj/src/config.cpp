#include "lure/config.hpp"

#include <fstream>
#include <set>

#include "lure/errors.hpp"

namespace lure {

namespace {

using nlohmann::json;

/// Rejects keys the schema does not know; silent typos would otherwise turn
/// a sweep into a no-op.
void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
        }
    }
}

template <typename T>
void get_to(const json& j, const std::string& where, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

Strategy parse_strategy(const json& j) {
    check_keys(j, "strategy",
               {"name", "retain", "importance", "split_layer", "shrink", "noise_std",
                "perturb_biases"});
    Strategy s;
    std::string name = "lure";
    get_to(j, "strategy", "name", name);
    if (name == "warm") {
        s.kind = StrategyKind::WarmStart;
    } else if (name == "cold") {
        s.kind = StrategyKind::ColdStart;
    } else if (name == "lure") {
        s.kind = StrategyKind::Lure;
    } else if (name == "rifle") {
        s.kind = StrategyKind::Rifle;
    } else if (name == "llf") {
        s.kind = StrategyKind::Llf;
    } else if (name == "shrink_perturb") {
        s.kind = StrategyKind::ShrinkPerturb;
    } else {
        throw ConfigError("strategy.name: unknown strategy \"" + name + "\"");
    }
    get_to(j, "strategy", "retain", s.retention);
    std::string importance = importance_method_name(s.method);
    get_to(j, "strategy", "importance", importance);
    s.method = importance_method_from_name(importance);
    get_to(j, "strategy", "split_layer", s.split_layer);
    get_to(j, "strategy", "shrink", s.shrink);
    get_to(j, "strategy", "noise_std", s.noise_std);
    get_to(j, "strategy", "perturb_biases", s.perturb_biases);
    return s;
}

} // namespace

ExperimentConfig parse_experiment_config(const json& j) {
    check_keys(j, "config",
               {"schema_version", "dataset", "stream", "network", "train", "strategy", "replay",
                "subset", "metrics", "seeds", "output_dir"});
    ExperimentConfig c;
    if (!j.contains("schema_version")) throw ConfigError("config: missing schema_version");
    get_to(j, "config", "schema_version", c.schema_version);
    if (c.schema_version != 1) {
        throw ConfigError("config.schema_version: unsupported version " +
                          std::to_string(c.schema_version));
    }

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, "dataset",
                   {"type", "classes", "per_class", "dim", "separation", "test_per_class",
                    "train_images", "train_labels", "test_images", "test_labels", "limit",
                    "train", "test", "label_column"});
        get_to(d, "dataset", "type", c.dataset.type);
        get_to(d, "dataset", "classes", c.dataset.classes);
        get_to(d, "dataset", "per_class", c.dataset.per_class);
        get_to(d, "dataset", "dim", c.dataset.dim);
        get_to(d, "dataset", "separation", c.dataset.separation);
        get_to(d, "dataset", "test_per_class", c.dataset.test_per_class);
        get_to(d, "dataset", "train_images", c.dataset.train_images);
        get_to(d, "dataset", "train_labels", c.dataset.train_labels);
        get_to(d, "dataset", "test_images", c.dataset.test_images);
        get_to(d, "dataset", "test_labels", c.dataset.test_labels);
        get_to(d, "dataset", "limit", c.dataset.limit);
        get_to(d, "dataset", "train", c.dataset.train_csv);
        get_to(d, "dataset", "test", c.dataset.test_csv);
        get_to(d, "dataset", "label_column", c.dataset.label_column);
    }

    if (j.contains("stream")) {
        const json& s = j.at("stream");
        check_keys(s, "stream", {"megabatches", "val_fraction", "per_class_cap", "label_noise"});
        get_to(s, "stream", "megabatches", c.stream.megabatches);
        get_to(s, "stream", "val_fraction", c.stream.val_fraction);
        get_to(s, "stream", "per_class_cap", c.stream.per_class_cap);
        get_to(s, "stream", "label_noise", c.stream.label_noise);
    }

    if (j.contains("network")) {
        const json& n = j.at("network");
        check_keys(n, "network", {"hidden"});
        get_to(n, "network", "hidden", c.hidden);
        if (c.hidden.empty()) throw ConfigError("network.hidden: need at least one hidden layer");
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train",
                   {"epochs", "batch_size", "lr", "momentum", "weight_decay", "lr_steps", "lr_gamma",
                    "bias_weight_decay", "reset_optimizer", "mask_biases"});
        get_to(t, "train", "epochs", c.train.epochs);
        get_to(t, "train", "batch_size", c.train.batch_size);
        get_to(t, "train", "lr", c.train.optimizer.learning_rate);
        get_to(t, "train", "momentum", c.train.optimizer.momentum);
        get_to(t, "train", "weight_decay", c.train.optimizer.weight_decay);
        get_to(t, "train", "lr_steps", c.train.optimizer.lr_steps);
        get_to(t, "train", "lr_gamma", c.train.optimizer.lr_gamma);
        get_to(t, "train", "bias_weight_decay", c.train.optimizer.weight_decay_on_bias);
        get_to(t, "train", "reset_optimizer", c.train.reset_optimizer_per_megabatch);
        get_to(t, "train", "mask_biases", c.train.mask_include_biases);
    }

    if (j.contains("strategy")) c.train.strategy = parse_strategy(j.at("strategy"));

    if (j.contains("replay")) {
        const json& r = j.at("replay");
        check_keys(r, "replay", {"policy", "capacity"});
        std::string policy = "full";
        get_to(r, "replay", "policy", policy);
        std::size_t capacity = 186;
        get_to(r, "replay", "capacity", capacity);
        if (policy == "full") {
            c.train.replay = ReplayPolicy::full();
        } else if (policy == "buffered") {
            c.train.replay = ReplayPolicy::buffered(capacity);
        } else if (policy == "none") {
            c.train.replay = ReplayPolicy::none();
        } else {
            throw ConfigError("replay.policy: unknown policy \"" + policy + "\"");
        }
    }

    if (j.contains("subset")) {
        const json& s = j.at("subset");
        check_keys(s, "subset", {"fraction", "count"});
        get_to(s, "subset", "fraction", c.train.subset.fraction);
        get_to(s, "subset", "count", c.train.subset.count);
    }

    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        check_keys(m, "metrics",
                   {"ece_bins", "wall_time", "pgd", "perturbation_sigmas", "perturbation_draws",
                    "corruption", "overlap"});
        get_to(m, "metrics", "ece_bins", c.metrics.ece_bins);
        get_to(m, "metrics", "wall_time", c.metrics.wall_time);
        if (m.contains("pgd")) {
            const json& p = m.at("pgd");
            check_keys(p, "metrics.pgd", {"epsilons", "steps", "step_size", "clip01", "samples"});
            get_to(p, "metrics.pgd", "epsilons", c.metrics.pgd.epsilons);
            get_to(p, "metrics.pgd", "steps", c.metrics.pgd.steps);
            get_to(p, "metrics.pgd", "step_size", c.metrics.pgd.step_size);
            get_to(p, "metrics.pgd", "clip01", c.metrics.pgd.clip01);
            get_to(p, "metrics.pgd", "samples", c.metrics.pgd.samples);
        }
        get_to(m, "metrics", "perturbation_sigmas", c.metrics.perturbation_sigmas);
        get_to(m, "metrics", "perturbation_draws", c.metrics.perturbation_draws);
        if (m.contains("corruption")) {
            const json& cr = m.at("corruption");
            check_keys(cr, "metrics.corruption", {"kinds", "severities"});
            get_to(cr, "metrics.corruption", "kinds", c.metrics.corruption.kinds);
            get_to(cr, "metrics.corruption", "severities", c.metrics.corruption.severities);
        }
        get_to(m, "metrics", "overlap", c.metrics.overlap);
    }

    get_to(j, "config", "seeds", c.seeds);
    get_to(j, "config", "output_dir", c.output_dir);
    c.train.ece_bins = c.metrics.ece_bins;
    c.validate();
    return c;
}

void ExperimentConfig::validate() const {
    if (dataset.type != "synthetic" && dataset.type != "idx" && dataset.type != "csv") {
        throw ConfigError("dataset.type: unknown type \"" + dataset.type + "\"");
    }
    if (dataset.type == "synthetic") {
        if (dataset.classes < 2) throw ConfigError("dataset.classes must be >= 2");
        if (dataset.per_class < 1 || dataset.test_per_class < 1) {
            throw ConfigError("dataset.per_class and test_per_class must be >= 1");
        }
    }
    if (dataset.type == "idx" &&
        (dataset.train_images.empty() || dataset.train_labels.empty() ||
         dataset.test_images.empty() || dataset.test_labels.empty())) {
        throw ConfigError("dataset: idx source needs train/test image and label paths");
    }
    if (dataset.type == "csv" && (dataset.train_csv.empty() || dataset.test_csv.empty())) {
        throw ConfigError("dataset: csv source needs train and test paths");
    }
    if (stream.megabatches < 1) throw ConfigError("stream.megabatches must be >= 1");
    if (stream.val_fraction <= 0.0 || stream.val_fraction >= 1.0) {
        throw ConfigError("stream.val_fraction must be in (0, 1)");
    }
    if (stream.label_noise < 0.0 || stream.label_noise > 1.0) {
        throw ConfigError("stream.label_noise must be in [0, 1]");
    }
    if (hidden.empty()) throw ConfigError("network.hidden must not be empty");
    if (seeds.empty()) throw ConfigError("seeds: need at least one master seed");
    // Strategy and optimizer are revalidated per run once the layer count is known.
    train.optimizer.validate();
    if (train.subset.count == 0 &&
        (train.subset.fraction <= 0.0 || train.subset.fraction > 1.0)) {
        throw ConfigError("subset.fraction must be in (0, 1] when count is not set");
    }
    for (const auto& kind : metrics.corruption.kinds) corruption_kind_from_name(kind);
    for (int sev : metrics.corruption.severities) {
        if (sev < 1 || sev > 5) throw ConfigError("metrics.corruption.severities must be in [1, 5]");
    }
    for (double eps : metrics.pgd.epsilons) {
        if (eps < 0.0) throw ConfigError("metrics.pgd.epsilons must be >= 0");
    }
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_experiment_config(j);
}

nlohmann::json resolved_config_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    json d;
    d["type"] = c.dataset.type;
    if (c.dataset.type == "synthetic") {
        d["classes"] = c.dataset.classes;
        d["per_class"] = c.dataset.per_class;
        d["dim"] = c.dataset.dim;
        d["separation"] = c.dataset.separation;
        d["test_per_class"] = c.dataset.test_per_class;
    } else if (c.dataset.type == "idx") {
        d["train_images"] = c.dataset.train_images;
        d["train_labels"] = c.dataset.train_labels;
        d["test_images"] = c.dataset.test_images;
        d["test_labels"] = c.dataset.test_labels;
        d["limit"] = c.dataset.limit;
    } else {
        d["train"] = c.dataset.train_csv;
        d["test"] = c.dataset.test_csv;
        d["label_column"] = c.dataset.label_column;
    }
    j["dataset"] = d;
    j["stream"] = {{"megabatches", c.stream.megabatches},
                   {"val_fraction", c.stream.val_fraction},
                   {"per_class_cap", c.stream.per_class_cap},
                   {"label_noise", c.stream.label_noise}};
    j["network"] = {{"hidden", c.hidden}};
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"lr", c.train.optimizer.learning_rate},
                  {"momentum", c.train.optimizer.momentum},
                  {"weight_decay", c.train.optimizer.weight_decay},
                  {"lr_steps", c.train.optimizer.lr_steps},
                  {"lr_gamma", c.train.optimizer.lr_gamma},
                  {"bias_weight_decay", c.train.optimizer.weight_decay_on_bias},
                  {"reset_optimizer", c.train.reset_optimizer_per_megabatch},
                  {"mask_biases", c.train.mask_include_biases}};
    json s;
    s["name"] = [&] {
        switch (c.train.strategy.kind) {
            case StrategyKind::WarmStart: return "warm";
            case StrategyKind::ColdStart: return "cold";
            case StrategyKind::Lure: return "lure";
            case StrategyKind::Rifle: return "rifle";
            case StrategyKind::Llf: return "llf";
            case StrategyKind::ShrinkPerturb: return "shrink_perturb";
        }
        return "warm";
    }();
    s["retain"] = c.train.strategy.retention;
    s["importance"] = importance_method_name(c.train.strategy.method);
    s["split_layer"] = c.train.strategy.split_layer;
    s["shrink"] = c.train.strategy.shrink;
    s["noise_std"] = c.train.strategy.noise_std;
    s["perturb_biases"] = c.train.strategy.perturb_biases;
    j["strategy"] = s;
    json r;
    switch (c.train.replay.mode) {
        case ReplayMode::Full: r["policy"] = "full"; break;
        case ReplayMode::Buffered: r["policy"] = "buffered"; break;
        case ReplayMode::NoReplay: r["policy"] = "none"; break;
    }
    r["capacity"] = c.train.replay.capacity;
    j["replay"] = r;
    j["subset"] = {{"fraction", c.train.subset.fraction}, {"count", c.train.subset.count}};
    j["metrics"] = {{"ece_bins", c.metrics.ece_bins},
                    {"wall_time", c.metrics.wall_time},
                    {"pgd",
                     {{"epsilons", c.metrics.pgd.epsilons},
                      {"steps", c.metrics.pgd.steps},
                      {"step_size", c.metrics.pgd.step_size},
                      {"clip01", c.metrics.pgd.clip01},
                      {"samples", c.metrics.pgd.samples}}},
                    {"perturbation_sigmas", c.metrics.perturbation_sigmas},
                    {"perturbation_draws", c.metrics.perturbation_draws},
                    {"corruption",
                     {{"kinds", c.metrics.corruption.kinds},
                      {"severities", c.metrics.corruption.severities}}},
                    {"overlap", c.metrics.overlap}};
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    return j;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
    const std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const ExperimentConfig& config) {
    return fnv1a64_hex(resolved_config_json(config).dump());
}

ExperimentData build_experiment_data(const ExperimentConfig& config, std::uint64_t data_seed) {
    Rng data_rng(data_seed);
    ExperimentData out;
    Dataset source, test;
    if (config.dataset.type == "synthetic") {
        source = synth_blobs(config.dataset.classes, config.dataset.per_class, config.dataset.dim,
                             config.dataset.separation, data_rng);
        test = synth_blobs(config.dataset.classes, config.dataset.test_per_class, config.dataset.dim,
                           config.dataset.separation, data_rng);
    } else if (config.dataset.type == "idx") {
        source = load_idx(config.dataset.train_images, config.dataset.train_labels);
        test = load_idx(config.dataset.test_images, config.dataset.test_labels);
        if (config.dataset.limit > 0 && config.dataset.limit < source.size()) {
            std::vector<std::size_t> rows(config.dataset.limit);
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            source = source.select(rows);
        }
        if (test.class_count < source.class_count) test.class_count = source.class_count;
        if (source.class_count < test.class_count) source.class_count = test.class_count;
    } else {
        source = load_csv(config.dataset.train_csv, config.dataset.label_column);
        test = load_csv(config.dataset.test_csv, config.dataset.label_column);
        const int classes = std::max(source.class_count, test.class_count);
        source.class_count = classes;
        test.class_count = classes;
    }

    if (config.stream.per_class_cap > 0) {
        source = cap_per_class(source, config.stream.per_class_cap, data_rng);
    }
    if (config.stream.label_noise > 0.0) {
        source = corrupt_labels(source, config.stream.label_noise, data_rng);
    }
    out.stream = make_stream(source, config.stream.megabatches, config.stream.val_fraction,
                             std::move(test), data_rng);
    out.source = std::move(source);

    out.net_spec.layer_dims.push_back(out.source.dim());
    for (std::size_t h : config.hidden) out.net_spec.layer_dims.push_back(h);
    out.net_spec.layer_dims.push_back(static_cast<std::size_t>(out.source.class_count));
    out.net_spec.validate();
    return out;
}

} // namespace lure
