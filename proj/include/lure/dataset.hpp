#pragma once

#include <string>
#include <vector>

#include "lure/rng.hpp"
#include "lure/tensor.hpp"

namespace lure {

/// Labeled dataset: inputs [N x d], integer labels in [0, class_count).
struct Dataset {
    Tensor inputs;
    std::vector<int> labels;
    int class_count = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return inputs.cols(); }

    void validate() const;

    /// Row-subset copy in the given index order.
    Dataset select(const std::vector<std::size_t>& indices) const;

    /// Concatenation; class_count must agree.
    static Dataset concat(const Dataset& a, const Dataset& b);
};

/// C isotropic unit-variance Gaussian clusters, labels by cluster. Means sit
/// on a regular simplex scaled so every pairwise distance equals
/// `separation`, embedded in the first C-1 coordinates (requires d >= C-1).
Dataset synth_blobs(int class_count, std::size_t n_per_class, std::size_t dim, double separation,
                    Rng& rng);

/// Each label is independently resampled uniform over all classes with
/// probability `rate`; the draw may equal the original label, so the
/// expected changed fraction is rate * (C-1)/C.
Dataset corrupt_labels(const Dataset& data, double rate, Rng& rng);

/// At most n_per_class rows per class, chosen uniformly without replacement;
/// surviving rows keep their original order.
Dataset cap_per_class(const Dataset& data, std::size_t n_per_class, Rng& rng);

struct SubsetSpec {
    double fraction = 0.2; // used when count == 0
    std::size_t count = 0; // exact size when nonzero
};

/// Uniform random subset of `data` (the importance-estimation set pi).
Dataset sample_subset(const Dataset& data, const SubsetSpec& spec, Rng& rng);

/// IDX (big-endian) loaders; image bytes are scaled to [0, 1].
Tensor load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Numeric CSV with a header row; `label_column` is a header name, or a
/// 0-based column index if no header matches.
Dataset load_csv(const std::string& path, const std::string& label_column);

} // namespace lure
