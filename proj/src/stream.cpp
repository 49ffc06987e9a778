#include "lure/stream.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lure/errors.hpp"

namespace lure {

MegaBatchStream make_stream(const Dataset& source, std::size_t t, double val_fraction, Dataset test,
                            Rng& rng) {
    if (t < 1) throw InputError("stream needs at least one mega-batch");
    if (t > source.size()) {
        throw InputError("cannot split " + std::to_string(source.size()) + " samples into " +
                         std::to_string(t) + " mega-batches");
    }
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw InputError("val_fraction must be in (0, 1)");
    }
    const std::size_t n = source.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);

    MegaBatchStream stream;
    stream.test = std::move(test);
    const std::size_t base = n / t;
    const std::size_t extra = n % t;
    std::size_t offset = 0;
    for (std::size_t m = 0; m < t; ++m) {
        const std::size_t size = base + (m < extra ? 1 : 0);
        const std::size_t val_n =
            static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(size)));
        if (val_n == 0 || val_n >= size) {
            throw InputError("mega-batch of size " + std::to_string(size) +
                             " leaves an empty train or val split at val_fraction " +
                             std::to_string(val_fraction));
        }
        MegaBatch mb;
        mb.train_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(offset),
                                perm.begin() + static_cast<std::ptrdiff_t>(offset + size - val_n));
        mb.val_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(offset + size - val_n),
                              perm.begin() + static_cast<std::ptrdiff_t>(offset + size));
        mb.train = source.select(mb.train_indices);
        mb.val = source.select(mb.val_indices);
        stream.mega_batches.push_back(std::move(mb));
        offset += size;
    }
    return stream;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int class_count)
    : capacity_(capacity), class_count_(class_count) {
    if (capacity == 0) throw InputError("replay buffer capacity must be >= 1");
    if (class_count < 1) throw InputError("replay buffer needs a positive class count");
    reservoirs_.resize(static_cast<std::size_t>(class_count));
    seen_.assign(static_cast<std::size_t>(class_count), 0);
}

std::size_t ReplayBuffer::quota(std::size_t c) const {
    const std::size_t C = static_cast<std::size_t>(class_count_);
    return capacity_ / C + (c < capacity_ % C ? 1 : 0);
}

std::size_t ReplayBuffer::size() const {
    std::size_t n = 0;
    for (const auto& r : reservoirs_) n += r.size();
    return n;
}

void ReplayBuffer::update(const Dataset& finished_megabatch, std::size_t megabatch_index, Rng& rng) {
    if (finished_megabatch.class_count != class_count_) {
        throw InputError("buffer update with mismatched class count");
    }
    const std::size_t d = finished_megabatch.dim();
    if (dim_ == 0) dim_ = d;
    if (d != dim_) throw InputError("buffer update with mismatched input width");

    for (std::size_t i = 0; i < finished_megabatch.size(); ++i) {
        const auto c = static_cast<std::size_t>(finished_megabatch.labels[i]);
        auto& res = reservoirs_[c];
        const std::size_t q = quota(c);
        seen_[c] += 1;
        const double* row = finished_megabatch.inputs.data.data() + i * d;
        if (res.size() < q) {
            res.push_back(Slot{std::vector<double>(row, row + d), finished_megabatch.labels[i],
                               megabatch_index});
        } else if (q > 0) {
            // Algorithm R: replace slot r with probability q / seen.
            const std::size_t r = rng.uniform_index(seen_[c]);
            if (r < q) {
                res[r] = Slot{std::vector<double>(row, row + d), finished_megabatch.labels[i],
                              megabatch_index};
            }
        }
    }
}

Dataset ReplayBuffer::contents() const {
    Dataset out;
    out.class_count = class_count_;
    const std::size_t n = size();
    out.inputs = Tensor::zeros({n, dim_});
    out.labels.reserve(n);
    std::size_t row = 0;
    for (const auto& res : reservoirs_) {
        for (const auto& slot : res) {
            std::copy(slot.row.begin(), slot.row.end(), out.inputs.data.begin() + static_cast<std::ptrdiff_t>(row * dim_));
            out.labels.push_back(slot.label);
            ++row;
        }
    }
    return out;
}

std::vector<std::size_t> ReplayBuffer::provenance() const {
    std::vector<std::size_t> out;
    out.reserve(size());
    for (const auto& res : reservoirs_) {
        for (const auto& slot : res) out.push_back(slot.origin);
    }
    return out;
}

Dataset assemble_training_set(const MegaBatchStream& stream, std::size_t i, const ReplayPolicy& policy,
                              const ReplayBuffer& buffer) {
    if (i < 1 || i > stream.length()) {
        throw InputError("mega-batch index " + std::to_string(i) + " outside [1, " +
                         std::to_string(stream.length()) + "]");
    }
    switch (policy.mode) {
        case ReplayMode::NoReplay:
            return stream.at(i).train;
        case ReplayMode::Full: {
            Dataset out = stream.at(1).train;
            for (std::size_t m = 2; m <= i; ++m) out = Dataset::concat(out, stream.at(m).train);
            return out;
        }
        case ReplayMode::Buffered:
            return Dataset::concat(stream.at(i).train, buffer.contents());
    }
    throw ConfigError("unknown replay mode");
}

std::string stream_manifest_json(const MegaBatchStream& stream, std::size_t source_size) {
    nlohmann::json j;
    j["format"] = "lure-stream-manifest";
    j["version"] = 1;
    j["source_size"] = source_size;
    j["megabatches"] = nlohmann::json::array();
    for (const auto& mb : stream.mega_batches) {
        nlohmann::json entry;
        entry["train"] = mb.train_indices;
        entry["val"] = mb.val_indices;
        j["megabatches"].push_back(std::move(entry));
    }
    return j.dump(2);
}

void save_stream_manifest(const std::string& path, const MegaBatchStream& stream,
                          std::size_t source_size) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write stream manifest: " + path);
    out << stream_manifest_json(stream, source_size) << "\n";
}

} // namespace lure
