#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lure/dataset.hpp"
#include "lure/network.hpp"

namespace lure {

/// Mapping from the global flat maskable-parameter index to (entry, offset).
/// Entry order inside the ParameterSet is stable, so the same network always
/// exposes the same correspondence; biases can be excluded from masking.
class MaskableLayout {
public:
    MaskableLayout() = default;
    MaskableLayout(const ParameterSet& params, bool include_biases);

    std::size_t size() const { return total_; }
    bool include_biases() const { return include_biases_; }

    struct Segment {
        std::size_t entry_index; // into ParameterSet::entries()
        std::size_t flat_begin;  // first global flat index of this tensor
        std::size_t count;
    };
    const std::vector<Segment>& segments() const { return segments_; }

    /// Per-layer [begin, end) flat ranges, indexed by 1-based layer.
    struct LayerRange {
        std::size_t layer;
        std::size_t begin;
        std::size_t end;
    };
    const std::vector<LayerRange>& layer_ranges() const { return layer_ranges_; }

    /// Flat view of the parameter values (or any per-entry field) in layout order.
    std::vector<double> gather_values(const ParameterSet& params) const;
    std::vector<double> gather_gradients(const ParameterSet& params) const;

private:
    bool include_biases_ = true;
    std::size_t total_ = 0;
    std::vector<Segment> segments_;
    std::vector<LayerRange> layer_ranges_;
};

enum class ImportanceMethod : std::uint8_t { Snip = 0, Fisher = 1, Magnitude = 2, Random = 3 };

std::string importance_method_name(ImportanceMethod m);
ImportanceMethod importance_method_from_name(const std::string& name);

/// Binary retention mask over the flat maskable index with its saliencies.
struct SensitivityMask {
    std::vector<std::uint8_t> bits; // 1 = retained
    std::vector<double> saliencies;
    double retention_fraction = 1.0;
    std::size_t retained_count = 0;

    std::size_t size() const { return bits.size(); }
};

/// Connection sensitivity g_j = theta_j * dL/dtheta_j with the loss gradient
/// averaged over `subset` in mini-batches. This is the exact multiplicative-
/// mask derivative at mask = 1; parameters are left untouched, gradients are
/// scratch.
std::vector<double> snip_sensitivity(Network& net, const Dataset& subset, std::size_t batch_size,
                                     const MaskableLayout& layout);

/// Empirical diagonal Fisher: mean over mini-batches of the squared
/// mini-batch gradient, weighted by mini-batch size.
std::vector<double> fisher_importance(Network& net, const Dataset& subset, std::size_t batch_size,
                                      const MaskableLayout& layout);

/// |theta_j| per maskable parameter.
std::vector<double> magnitude_importance(const ParameterSet& params, const MaskableLayout& layout);

/// i.i.d. uniform(0,1) scores.
std::vector<double> random_importance(std::size_t m, Rng& rng);

/// s_j = |g_j| / sum |g|; all-zero input falls back to the uniform vector.
std::vector<double> normalize_saliency(const std::vector<double>& g);

/// Retain the floor(k*m) largest saliencies globally; ties break toward the
/// lower flat index.
SensitivityMask topk_mask(const std::vector<double>& saliencies, double retention_fraction);

/// Mask file: magic "LURM1", u64 m, f64 k, u8 method tag, u32 mega-batch
/// index, then bit-packed retention bits (bit j of the payload is flat index
/// j, LSB-first within each byte). Saliencies are not stored.
void save_mask(const std::string& path, const SensitivityMask& mask, ImportanceMethod method,
               std::size_t megabatch_index);

struct MaskFile {
    SensitivityMask mask; // saliencies empty on load
    ImportanceMethod method = ImportanceMethod::Snip;
    std::size_t megabatch_index = 0;
    double retention_fraction = 1.0;
};

MaskFile load_mask(const std::string& path);

} // namespace lure
