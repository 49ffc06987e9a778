#include "lure/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lure/errors.hpp"

namespace lure {

namespace {

constexpr char kMagic[5] = {'L', 'U', 'R', 'E', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

template <typename T>
void write_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ParseError(std::string("checkpoint truncated while reading ") + what);
    return v;
}

void write_shape(std::ostream& out, const std::vector<std::size_t>& shape) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
}

std::vector<std::size_t> read_shape(std::istream& in) {
    const auto rank = read_le<std::uint32_t>(in, "shape rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = read_le<std::uint32_t>(in, "shape dim");
    return shape;
}

} // namespace

void save_checkpoint(std::ostream& out, const NetworkSpec& spec, const ParameterSet& params,
                     bool include_momentum) {
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint8_t>(out, include_momentum ? 1 : 0);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.layer_dims.size()));
    for (std::size_t d : spec.layer_dims) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (const auto& e : params.entries()) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.layer_index));
        write_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.kind));
        write_shape(out, e.values.shape);
        out.write(reinterpret_cast<const char*>(e.values.data.data()),
                  static_cast<std::streamsize>(e.values.data.size() * sizeof(double)));
        if (include_momentum) {
            out.write(reinterpret_cast<const char*>(e.momentum.data.data()),
                      static_cast<std::streamsize>(e.momentum.data.size() * sizeof(double)));
        }
    }
    if (!out) throw ParseError("checkpoint write failed");
}

void save_checkpoint(const std::string& path, const NetworkSpec& spec, const ParameterSet& params,
                     bool include_momentum) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open checkpoint for writing: " + path);
    save_checkpoint(out, spec, params, include_momentum);
}

Checkpoint load_checkpoint(std::istream& in) {
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("bad checkpoint magic at byte offset 0 (want \"LURE1\")");
    }
    Checkpoint ck;
    const auto flags = read_le<std::uint8_t>(in, "flags");
    ck.has_momentum = (flags & 1) != 0;

    const auto ndims = read_le<std::uint32_t>(in, "layer dim count");
    ck.spec.layer_dims.resize(ndims);
    for (auto& d : ck.spec.layer_dims) d = read_le<std::uint32_t>(in, "layer dim");
    ck.spec.validate();

    const std::size_t entry_count = 2 * ck.spec.layer_count();
    for (std::size_t i = 0; i < entry_count; ++i) {
        const auto layer_index = read_le<std::uint32_t>(in, "entry layer index");
        const auto kind_raw = read_le<std::uint8_t>(in, "entry kind");
        if (kind_raw > 1) throw ParseError("unknown parameter kind tag " + std::to_string(kind_raw));
        Tensor values = Tensor::zeros(read_shape(in));
        in.read(reinterpret_cast<char*>(values.data.data()),
                static_cast<std::streamsize>(values.data.size() * sizeof(double)));
        if (!in) throw ParseError("checkpoint truncated inside entry " + std::to_string(i) + " values");
        ck.params.add_entry(layer_index, static_cast<ParamKind>(kind_raw), std::move(values));
        if (ck.has_momentum) {
            auto& momentum = ck.params.entries().back().momentum;
            in.read(reinterpret_cast<char*>(momentum.data.data()),
                    static_cast<std::streamsize>(momentum.data.size() * sizeof(double)));
            if (!in) throw ParseError("checkpoint truncated inside entry " + std::to_string(i) + " momentum");
        }
    }
    return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint: " + path);
    return load_checkpoint(in);
}

} // namespace lure
