#pragma once

#include <cstdint>
#include <string>

#include "lure/network.hpp"
#include "lure/saliency.hpp"

namespace lure {

enum class StrategyKind : std::uint8_t {
    WarmStart = 0,
    ColdStart = 1,
    Lure = 2,
    Rifle = 3,
    Llf = 4,
    ShrinkPerturb = 5,
};

/// What happens to the parameters between mega-batches.
struct Strategy {
    StrategyKind kind = StrategyKind::WarmStart;

    // Lure
    double retention = 0.8;
    ImportanceMethod method = ImportanceMethod::Snip;

    // Llf: 1-based first layer to reinitialize; 0 means the later-half
    // default ceil(L/2) + 1.
    std::size_t split_layer = 0;

    // ShrinkPerturb
    double shrink = 0.4;
    double noise_std = 0.001;
    bool perturb_biases = true;

    std::string name() const;
    void validate(std::size_t layer_count) const;
};

/// Every application returns the number of parameter values it modified
/// (reinitialized, shrunk, or perturbed), for the strategy log.

/// Eq-style selective reinit: retained bits keep their exact values; dropped
/// bits get fresh init_uniform draws with the owning layer's fan-in, and
/// their momentum resets to zero.
std::size_t apply_lure(ParameterSet& params, const NetworkSpec& spec, const SensitivityMask& mask,
                       const MaskableLayout& layout, Rng& rng);

/// Redraw only the final layer's weights and biases.
std::size_t apply_rifle(ParameterSet& params, const NetworkSpec& spec, Rng& rng);

/// Redraw every layer with index >= split_layer (1-based).
std::size_t apply_llf(ParameterSet& params, const NetworkSpec& spec, std::size_t split_layer, Rng& rng);

/// theta' = shrink * theta + Normal(0, noise_std^2), whole network.
std::size_t apply_shrink_perturb(ParameterSet& params, double shrink, double noise_std,
                                 bool include_biases, Rng& rng);

/// Redraw everything (cold) / exact identity (warm).
std::size_t apply_cold(ParameterSet& params, const NetworkSpec& spec, Rng& rng);
std::size_t apply_warm(ParameterSet& params);

} // namespace lure
