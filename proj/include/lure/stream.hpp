#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lure/dataset.hpp"
#include "lure/rng.hpp"

namespace lure {

/// One chunk of the data stream with its train/validation split, plus the
/// index sets into the source dataset so a run can be reconstructed exactly.
struct MegaBatch {
    Dataset train;
    Dataset val;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices;
};

struct MegaBatchStream {
    std::vector<MegaBatch> mega_batches;
    Dataset test;

    std::size_t length() const { return mega_batches.size(); }
    /// 1-based access matching the protocol's M_i numbering.
    const MegaBatch& at(std::size_t i) const { return mega_batches.at(i - 1); }
};

/// Random equal partition of `source` into t mega-batches (remainder rows go
/// one each to the first N mod t batches), each split into train and a
/// round(val_fraction * size) validation slice.
MegaBatchStream make_stream(const Dataset& source, std::size_t t, double val_fraction,
                            Dataset test, Rng& rng);

enum class ReplayMode : std::uint8_t { Full = 0, Buffered = 1, NoReplay = 2 };

struct ReplayPolicy {
    ReplayMode mode = ReplayMode::Full;
    std::size_t capacity = 0; // Buffered only

    static ReplayPolicy full() { return {ReplayMode::Full, 0}; }
    static ReplayPolicy buffered(std::size_t capacity) { return {ReplayMode::Buffered, capacity}; }
    static ReplayPolicy none() { return {ReplayMode::NoReplay, 0}; }
};

/// Class-balanced reservoir over all past mega-batches. Class c gets quota
/// capacity/C (+1 for the first capacity mod C classes); within a class the
/// reservoir is a uniform without-replacement sample of every past sample of
/// that class (Algorithm R).
class ReplayBuffer {
public:
    ReplayBuffer() = default;
    ReplayBuffer(std::size_t capacity, int class_count);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const;

    /// Absorb the train split of a finished mega-batch (1-based index kept
    /// as provenance).
    void update(const Dataset& finished_megabatch, std::size_t megabatch_index, Rng& rng);

    /// Buffer contents flattened to a dataset, class by class in slot order.
    Dataset contents() const;
    /// Mega-batch index each buffered sample came from, aligned with contents().
    std::vector<std::size_t> provenance() const;

private:
    struct Slot {
        std::vector<double> row;
        int label = 0;
        std::size_t origin = 0;
    };
    std::size_t capacity_ = 0;
    int class_count_ = 0;
    std::size_t dim_ = 0;
    std::vector<std::vector<Slot>> reservoirs_; // per class
    std::vector<std::size_t> seen_;             // per class, total past samples

    std::size_t quota(std::size_t c) const;
};

/// Training set for mega-batch i under the replay policy: all train splits so
/// far (Full), the current train split only (NoReplay), or the current train
/// split plus the buffer (Buffered).
Dataset assemble_training_set(const MegaBatchStream& stream, std::size_t i, const ReplayPolicy& policy,
                              const ReplayBuffer& buffer);

/// JSON manifest of the per-mega-batch index sets.
std::string stream_manifest_json(const MegaBatchStream& stream, std::size_t source_size);
void save_stream_manifest(const std::string& path, const MegaBatchStream& stream,
                          std::size_t source_size);

} // namespace lure
