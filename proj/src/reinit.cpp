#include "lure/reinit.hpp"

#include <cmath>

#include "lure/errors.hpp"

namespace lure {

std::string Strategy::name() const {
    switch (kind) {
        case StrategyKind::WarmStart: return "warm";
        case StrategyKind::ColdStart: return "cold";
        case StrategyKind::Lure: return "lure-" + importance_method_name(method);
        case StrategyKind::Rifle: return "rifle";
        case StrategyKind::Llf: return "llf";
        case StrategyKind::ShrinkPerturb: return "shrink_perturb";
    }
    return "unknown";
}

void Strategy::validate(std::size_t layer_count) const {
    switch (kind) {
        case StrategyKind::Lure:
            if (retention <= 0.0 || retention > 1.0) throw ConfigError("lure retention must be in (0, 1]");
            break;
        case StrategyKind::Llf:
            if (split_layer > layer_count + 1) {
                throw ConfigError("llf split_layer " + std::to_string(split_layer) + " beyond L+1 = " +
                                  std::to_string(layer_count + 1));
            }
            break;
        case StrategyKind::ShrinkPerturb:
            if (shrink < 0.0 || shrink > 1.0) throw ConfigError("shrink must be in [0, 1]");
            if (noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
            break;
        default:
            break;
    }
}

namespace {

std::size_t redraw_layers(ParameterSet& params, const NetworkSpec& spec, std::size_t first_layer,
                          Rng& rng) {
    std::size_t modified = 0;
    for (auto& e : params.entries()) {
        if (e.layer_index < first_layer) continue;
        e.values = init_uniform(e.values.shape, spec.fan_in(e.layer_index), rng);
        std::fill(e.momentum.data.begin(), e.momentum.data.end(), 0.0);
        modified += e.values.numel();
    }
    return modified;
}

} // namespace

std::size_t apply_lure(ParameterSet& params, const NetworkSpec& spec, const SensitivityMask& mask,
                       const MaskableLayout& layout, Rng& rng) {
    if (mask.bits.size() != layout.size()) {
        throw ConfigError("mask length " + std::to_string(mask.bits.size()) +
                          " does not match maskable parameter count " + std::to_string(layout.size()));
    }
    std::size_t modified = 0;
    for (const auto& seg : layout.segments()) {
        ParamEntry& e = params.entries()[seg.entry_index];
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in(e.layer_index)));
        for (std::size_t i = 0; i < seg.count; ++i) {
            if (mask.bits[seg.flat_begin + i]) continue;
            e.values.data[i] = rng.uniform(-bound, bound);
            e.momentum.data[i] = 0.0;
            ++modified;
        }
    }
    return modified;
}

std::size_t apply_rifle(ParameterSet& params, const NetworkSpec& spec, Rng& rng) {
    return redraw_layers(params, spec, spec.layer_count(), rng);
}

std::size_t apply_llf(ParameterSet& params, const NetworkSpec& spec, std::size_t split_layer, Rng& rng) {
    if (split_layer < 1) throw ConfigError("llf split_layer must be >= 1");
    return redraw_layers(params, spec, split_layer, rng);
}

std::size_t apply_shrink_perturb(ParameterSet& params, double shrink, double noise_std,
                                 bool include_biases, Rng& rng) {
    std::size_t modified = 0;
    for (auto& e : params.entries()) {
        if (!include_biases && e.kind == ParamKind::Bias) continue;
        for (double& v : e.values.data) {
            v = shrink * v + (noise_std > 0.0 ? rng.gaussian(0.0, noise_std) : 0.0);
        }
        modified += e.values.numel();
    }
    return modified;
}

std::size_t apply_cold(ParameterSet& params, const NetworkSpec& spec, Rng& rng) {
    return redraw_layers(params, spec, 1, rng);
}

std::size_t apply_warm(ParameterSet& params) {
    (void)params;
    return 0;
}

} // namespace lure
