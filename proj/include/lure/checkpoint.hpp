#pragma once

#include <iosfwd>
#include <string>

#include "lure/network.hpp"

namespace lure {

/// Checkpoint binary layout, all multi-byte integers little-endian:
///   magic "LURE1" (5 bytes)
///   flags u8 (bit 0: momentum buffers present)
///   layer_dims: u32 count, then count x u32
///   per parameter entry, in set order:
///     layer_index u32, kind u8, shape (u32 rank, rank x u32 dims),
///     values as f64, then momentum as f64 iff the flag bit is set.
void save_checkpoint(std::ostream& out, const NetworkSpec& spec, const ParameterSet& params,
                     bool include_momentum);
void save_checkpoint(const std::string& path, const NetworkSpec& spec, const ParameterSet& params,
                     bool include_momentum);

struct Checkpoint {
    NetworkSpec spec;
    ParameterSet params;
    bool has_momentum = false;
};

Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

} // namespace lure
