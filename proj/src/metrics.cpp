#include "lure/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lure/errors.hpp"
#include "lure/trainer.hpp"

namespace lure {

std::vector<std::size_t> cer(const std::vector<std::size_t>& error_counts) {
    std::vector<std::size_t> out(error_counts.size());
    std::size_t acc = 0;
    for (std::size_t i = 0; i < error_counts.size(); ++i) {
        acc += error_counts[i];
        out[i] = acc;
    }
    return out;
}

double generalization_gap(double train_acc, double val_acc) { return train_acc - val_acc; }

double ece(const std::vector<double>& confidences, const std::vector<std::uint8_t>& correctness,
           std::size_t n_bins) {
    if (n_bins == 0) throw InputError("ece needs at least one bin");
    if (confidences.size() != correctness.size()) {
        throw InputError("ece: confidence/correctness length mismatch");
    }
    if (confidences.empty()) return 0.0;
    const std::size_t n = confidences.size();
    std::vector<double> conf_sum(n_bins, 0.0), acc_sum(n_bins, 0.0);
    std::vector<std::size_t> count(n_bins, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = confidences[i];
        if (c < 0.0 || c > 1.0) throw InputError("ece: confidence outside [0, 1]");
        // right-inclusive bins: (b/n, (b+1)/n], with 0 joining the first bin
        std::size_t b = 0;
        if (c > 0.0) {
            b = static_cast<std::size_t>(std::ceil(c * static_cast<double>(n_bins))) - 1;
            if (b >= n_bins) b = n_bins - 1;
        }
        conf_sum[b] += c;
        acc_sum[b] += correctness[i] ? 1.0 : 0.0;
        count[b] += 1;
    }
    double total = 0.0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (count[b] == 0) continue;
        const double w = static_cast<double>(count[b]) / static_cast<double>(n);
        const double avg_conf = conf_sum[b] / static_cast<double>(count[b]);
        const double avg_acc = acc_sum[b] / static_cast<double>(count[b]);
        total += w * std::abs(avg_acc - avg_conf);
    }
    return total;
}

OverlapReport mask_overlap(const SensitivityMask& prev, const SensitivityMask& curr,
                           const std::vector<MaskableLayout::LayerRange>& layer_ranges) {
    if (prev.bits.size() != curr.bits.size()) {
        throw InputError("mask_overlap: masks have different lengths");
    }
    OverlapReport report;
    for (const auto& range : layer_ranges) {
        if (range.end > prev.bits.size()) throw InputError("mask_overlap: layer range beyond mask");
        std::size_t prev_retained = 0, both = 0;
        for (std::size_t j = range.begin; j < range.end; ++j) {
            if (!prev.bits[j]) continue;
            ++prev_retained;
            if (curr.bits[j]) ++both;
        }
        OverlapReport::Layer layer;
        layer.layer = range.layer;
        if (prev_retained > 0) {
            layer.overlap_pct = 100.0 * static_cast<double>(both) / static_cast<double>(prev_retained);
        }
        report.layers.push_back(layer);
    }
    return report;
}

namespace {

inline double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

} // namespace

Tensor pgd_attack(Network& net, const Tensor& inputs, const std::vector<int>& labels,
                  const PgdConfig& config, Rng& rng) {
    if (config.epsilon < 0.0) throw InputError("pgd epsilon must be >= 0");
    if (config.steps < 1) throw InputError("pgd needs at least one step");
    const double eps = config.epsilon;
    const double step = config.effective_step();

    Tensor adv = inputs;
    for (double& v : adv.data) v += rng.uniform(-eps, eps);
    if (config.clip01) {
        for (double& v : adv.data) v = clamp(v, 0.0, 1.0);
    }
    for (std::size_t it = 0; it < config.steps; ++it) {
        const Tensor logits = net.forward(adv);
        const LossResult loss = softmax_cross_entropy(logits, labels);
        const Tensor dinputs = net.backward(adv, loss.dlogits);
        for (std::size_t i = 0; i < adv.data.size(); ++i) {
            double v = adv.data[i] + step * sign(dinputs.data[i]);
            v = clamp(v, inputs.data[i] - eps, inputs.data[i] + eps);
            if (config.clip01) v = clamp(v, 0.0, 1.0);
            adv.data[i] = v;
        }
    }
    net.invalidate_cache();
    return adv;
}

double adversarial_accuracy(Network& net, const Dataset& data, const PgdConfig& config, Rng& rng,
                            std::size_t batch_size) {
    if (data.size() == 0) throw InputError("adversarial_accuracy: empty dataset");
    std::size_t correct = 0;
    const std::size_t d = data.dim();
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, data.size());
        std::vector<std::size_t> rows(end - begin);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
        const Dataset batch = data.select(rows);
        const Tensor adv = pgd_attack(net, batch.inputs, batch.labels, config, rng);
        const Tensor logits = net.forward_pure(adv);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::size_t arg = 0;
            for (std::size_t j = 1; j < logits.cols(); ++j) {
                if (logits.at(i, j) > logits.at(i, arg)) arg = j;
            }
            if (static_cast<int>(arg) == batch.labels[i]) ++correct;
        }
        (void)d;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

Network perturb_parameters(const Network& net, double noise_std, Rng& rng) {
    Network copy = net;
    if (noise_std > 0.0) {
        for (auto& e : copy.params().entries()) {
            for (double& v : e.values.data) v += rng.gaussian(0.0, noise_std);
        }
    }
    copy.invalidate_cache();
    return copy;
}

std::string corruption_kind_name(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::GaussianNoise: return "gaussian_noise";
        case CorruptionKind::UniformNoise: return "uniform_noise";
        case CorruptionKind::FeatureDropout: return "feature_dropout";
    }
    return "unknown";
}

CorruptionKind corruption_kind_from_name(const std::string& name) {
    if (name == "gaussian_noise") return CorruptionKind::GaussianNoise;
    if (name == "uniform_noise") return CorruptionKind::UniformNoise;
    if (name == "feature_dropout") return CorruptionKind::FeatureDropout;
    throw ConfigError("unknown corruption kind \"" + name + "\"");
}

double corruption_scale(CorruptionKind kind, int severity) {
    if (severity < 1 || severity > 5) {
        throw InputError("corruption severity " + std::to_string(severity) + " outside [1, 5]");
    }
    (void)kind; // one linear table for all kinds
    return 0.1 * severity;
}

Tensor corrupt_inputs(const Tensor& inputs, CorruptionKind kind, int severity, Rng& rng) {
    const double scale = corruption_scale(kind, severity);
    Tensor out = inputs;
    switch (kind) {
        case CorruptionKind::GaussianNoise:
            for (double& v : out.data) v += rng.gaussian(0.0, scale);
            break;
        case CorruptionKind::UniformNoise:
            for (double& v : out.data) v += rng.uniform(-scale, scale);
            break;
        case CorruptionKind::FeatureDropout:
            for (double& v : out.data) {
                if (rng.uniform01() < scale) v = 0.0;
            }
            break;
    }
    return out;
}

double mean_corruption_accuracy(Network& net, const Dataset& data,
                                const std::vector<CorruptionKind>& kinds,
                                const std::vector<int>& severities, Rng& rng) {
    if (kinds.empty() || severities.empty()) {
        throw InputError("mean_corruption_accuracy needs a nonempty kinds x severities grid");
    }
    double total = 0.0;
    for (CorruptionKind kind : kinds) {
        for (int severity : severities) {
            Dataset corrupted = data;
            corrupted.inputs = corrupt_inputs(data.inputs, kind, severity, rng);
            total += evaluate(net, corrupted).accuracy;
        }
    }
    return total / static_cast<double>(kinds.size() * severities.size());
}

} // namespace lure
