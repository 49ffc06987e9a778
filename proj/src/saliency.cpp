#include "lure/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "lure/errors.hpp"

namespace lure {

MaskableLayout::MaskableLayout(const ParameterSet& params, bool include_biases)
    : include_biases_(include_biases) {
    std::size_t flat = 0;
    std::size_t current_layer = 0;
    for (std::size_t e = 0; e < params.entries().size(); ++e) {
        const ParamEntry& entry = params.entries()[e];
        if (!include_biases && entry.kind == ParamKind::Bias) continue;
        if (entry.layer_index != current_layer) {
            layer_ranges_.push_back({entry.layer_index, flat, flat});
            current_layer = entry.layer_index;
        }
        segments_.push_back({e, flat, entry.values.numel()});
        flat += entry.values.numel();
        layer_ranges_.back().end = flat;
    }
    total_ = flat;
}

std::vector<double> MaskableLayout::gather_values(const ParameterSet& params) const {
    std::vector<double> out(total_);
    for (const auto& seg : segments_) {
        const auto& v = params.entries()[seg.entry_index].values.data;
        std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(seg.flat_begin));
    }
    return out;
}

std::vector<double> MaskableLayout::gather_gradients(const ParameterSet& params) const {
    std::vector<double> out(total_);
    for (const auto& seg : segments_) {
        const auto& v = params.entries()[seg.entry_index].gradient.data;
        std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(seg.flat_begin));
    }
    return out;
}

std::string importance_method_name(ImportanceMethod m) {
    switch (m) {
        case ImportanceMethod::Snip: return "snip";
        case ImportanceMethod::Fisher: return "fisher";
        case ImportanceMethod::Magnitude: return "magnitude";
        case ImportanceMethod::Random: return "random";
    }
    return "unknown";
}

ImportanceMethod importance_method_from_name(const std::string& name) {
    if (name == "snip") return ImportanceMethod::Snip;
    if (name == "fisher") return ImportanceMethod::Fisher;
    if (name == "magnitude") return ImportanceMethod::Magnitude;
    if (name == "random") return ImportanceMethod::Random;
    throw ConfigError("unknown importance method \"" + name + "\"");
}

namespace {

/// Runs fn(batch_gradient_flat, batch_size) for each mini-batch of `subset`,
/// in order, with gradients of that mini-batch's mean loss.
template <typename Fn>
void for_each_batch_gradient(Network& net, const Dataset& subset, std::size_t batch_size,
                             const MaskableLayout& layout, Fn&& fn) {
    if (subset.size() == 0) throw InputError("importance estimation needs a nonempty subset");
    if (batch_size == 0) batch_size = subset.size();
    for (std::size_t begin = 0; begin < subset.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, subset.size());
        std::vector<std::size_t> rows(end - begin);
        std::iota(rows.begin(), rows.end(), begin);
        const Dataset batch = subset.select(rows);
        const std::vector<int>& labels = batch.labels;
        const Tensor logits = net.forward(batch.inputs);
        const LossResult loss = softmax_cross_entropy(logits, labels);
        net.backward(batch.inputs, loss.dlogits);
        fn(layout.gather_gradients(net.params()), end - begin);
    }
}

} // namespace

std::vector<double> snip_sensitivity(Network& net, const Dataset& subset, std::size_t batch_size,
                                     const MaskableLayout& layout) {
    std::vector<double> grad_acc(layout.size(), 0.0);
    const double total = static_cast<double>(subset.size());
    for_each_batch_gradient(net, subset, batch_size, layout,
                            [&](const std::vector<double>& g, std::size_t n) {
                                const double w = static_cast<double>(n) / total;
                                for (std::size_t j = 0; j < g.size(); ++j) grad_acc[j] += w * g[j];
                            });
    const std::vector<double> theta = layout.gather_values(net.params());
    for (std::size_t j = 0; j < grad_acc.size(); ++j) grad_acc[j] *= theta[j];
    return grad_acc;
}

std::vector<double> fisher_importance(Network& net, const Dataset& subset, std::size_t batch_size,
                                      const MaskableLayout& layout) {
    std::vector<double> acc(layout.size(), 0.0);
    const double total = static_cast<double>(subset.size());
    for_each_batch_gradient(net, subset, batch_size, layout,
                            [&](const std::vector<double>& g, std::size_t n) {
                                const double w = static_cast<double>(n) / total;
                                for (std::size_t j = 0; j < g.size(); ++j) acc[j] += w * g[j] * g[j];
                            });
    return acc;
}

std::vector<double> magnitude_importance(const ParameterSet& params, const MaskableLayout& layout) {
    std::vector<double> g = layout.gather_values(params);
    for (double& v : g) v = std::abs(v);
    return g;
}

std::vector<double> random_importance(std::size_t m, Rng& rng) {
    std::vector<double> g(m);
    for (double& v : g) v = rng.uniform01();
    return g;
}

std::vector<double> normalize_saliency(const std::vector<double>& g) {
    if (g.empty()) throw InputError("normalize_saliency: empty saliency vector");
    double sum = 0.0;
    for (double v : g) sum += std::abs(v);
    std::vector<double> s(g.size());
    if (sum == 0.0) {
        std::fill(s.begin(), s.end(), 1.0 / static_cast<double>(g.size()));
        return s;
    }
    for (std::size_t j = 0; j < g.size(); ++j) s[j] = std::abs(g[j]) / sum;
    return s;
}

SensitivityMask topk_mask(const std::vector<double>& saliencies, double retention_fraction) {
    const std::size_t m = saliencies.size();
    if (m == 0) throw InputError("topk_mask: empty saliency vector");
    if (retention_fraction <= 0.0 || retention_fraction > 1.0) {
        throw InputError("retention fraction must be in (0, 1]");
    }
    const std::size_t keep =
        static_cast<std::size_t>(std::floor(retention_fraction * static_cast<double>(m)));
    if (keep == 0) throw InputError("retention fraction keeps zero parameters");

    SensitivityMask mask;
    mask.saliencies = saliencies;
    mask.retention_fraction = retention_fraction;
    mask.retained_count = keep;
    mask.bits.assign(m, 0);

    std::vector<std::uint32_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (saliencies[a] != saliencies[b]) return saliencies[a] > saliencies[b];
        return a < b; // deterministic tie-break toward the lower flat index
    };
    if (keep < m) {
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                         order.end(), better);
    }
    for (std::size_t i = 0; i < keep; ++i) mask.bits[order[i]] = 1;
    return mask;
}

namespace {
constexpr char kMaskMagic[5] = {'L', 'U', 'R', 'M', '1'};
}

void save_mask(const std::string& path, const SensitivityMask& mask, ImportanceMethod method,
               std::size_t megabatch_index) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write mask file: " + path);
    out.write(kMaskMagic, sizeof(kMaskMagic));
    const std::uint64_t m = mask.bits.size();
    const double k = mask.retention_fraction;
    const std::uint8_t tag = static_cast<std::uint8_t>(method);
    const std::uint32_t mb = static_cast<std::uint32_t>(megabatch_index);
    out.write(reinterpret_cast<const char*>(&m), sizeof(m));
    out.write(reinterpret_cast<const char*>(&k), sizeof(k));
    out.write(reinterpret_cast<const char*>(&tag), sizeof(tag));
    out.write(reinterpret_cast<const char*>(&mb), sizeof(mb));
    std::vector<std::uint8_t> packed((mask.bits.size() + 7) / 8, 0);
    for (std::size_t j = 0; j < mask.bits.size(); ++j) {
        if (mask.bits[j]) packed[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    }
    out.write(reinterpret_cast<const char*>(packed.data()),
              static_cast<std::streamsize>(packed.size()));
    if (!out) throw ParseError("mask write failed: " + path);
}

MaskFile load_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open mask file: " + path);
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMaskMagic, sizeof(kMaskMagic)) != 0) {
        throw ParseError(path + ": bad mask magic at byte offset 0");
    }
    std::uint64_t m = 0;
    double k = 0.0;
    std::uint8_t tag = 0;
    std::uint32_t mb = 0;
    in.read(reinterpret_cast<char*>(&m), sizeof(m));
    in.read(reinterpret_cast<char*>(&k), sizeof(k));
    in.read(reinterpret_cast<char*>(&tag), sizeof(tag));
    in.read(reinterpret_cast<char*>(&mb), sizeof(mb));
    if (!in) throw ParseError(path + ": truncated mask header");
    if (tag > 3) throw ParseError(path + ": unknown importance method tag");

    MaskFile file;
    file.method = static_cast<ImportanceMethod>(tag);
    file.megabatch_index = mb;
    file.retention_fraction = k;
    file.mask.retention_fraction = k;
    file.mask.bits.assign(m, 0);
    std::vector<std::uint8_t> packed((m + 7) / 8, 0);
    in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
    if (!in) throw ParseError(path + ": truncated mask payload");
    std::size_t retained = 0;
    for (std::size_t j = 0; j < m; ++j) {
        file.mask.bits[j] = (packed[j / 8] >> (j % 8)) & 1u;
        retained += file.mask.bits[j];
    }
    file.mask.retained_count = retained;
    return file;
}

} // namespace lure
