#include "lure/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "lure/errors.hpp"

namespace lure {

void Dataset::validate() const {
    if (labels.size() != inputs.rows()) {
        throw InputError("dataset has " + std::to_string(inputs.rows()) + " input rows but " +
                         std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count) {
            throw InputError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                             " outside [0, " + std::to_string(class_count) + ")");
        }
    }
}

Dataset Dataset::select(const std::vector<std::size_t>& indices) const {
    const std::size_t d = dim();
    Dataset out;
    out.class_count = class_count;
    out.inputs = Tensor::zeros({indices.size(), d});
    out.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t i = indices[r];
        std::copy_n(inputs.data.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                    out.inputs.data.begin() + static_cast<std::ptrdiff_t>(r * d));
        out.labels.push_back(labels[i]);
    }
    return out;
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b) {
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    if (a.class_count != b.class_count || a.dim() != b.dim()) {
        throw InputError("cannot concatenate datasets with mismatched classes or width");
    }
    Dataset out;
    out.class_count = a.class_count;
    out.inputs = Tensor::zeros({a.size() + b.size(), a.dim()});
    std::copy(a.inputs.data.begin(), a.inputs.data.end(), out.inputs.data.begin());
    std::copy(b.inputs.data.begin(), b.inputs.data.end(),
              out.inputs.data.begin() + static_cast<std::ptrdiff_t>(a.inputs.data.size()));
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

namespace {

// Column c of the Helmert orthonormal basis of the zero-sum hyperplane in
// R^C gives coordinates of a regular simplex vertex with pairwise distance
// sqrt(2) between vertices.
double helmert_coord(std::size_t k, std::size_t c) {
    // k in [1, C-1]; basis vector h_k = (1,..,1, -k, 0,..,0)/sqrt(k(k+1))
    const double norm = std::sqrt(static_cast<double>(k) * static_cast<double>(k + 1));
    if (c < k) return 1.0 / norm;
    if (c == k) return -static_cast<double>(k) / norm;
    return 0.0;
}

} // namespace

Dataset synth_blobs(int class_count, std::size_t n_per_class, std::size_t dim, double separation,
                    Rng& rng) {
    if (class_count < 2) throw InputError("synth_blobs needs at least 2 classes");
    if (dim < 2) throw InputError("synth_blobs needs dim >= 2");
    const std::size_t C = static_cast<std::size_t>(class_count);
    if (dim + 1 < C) {
        throw InputError("synth_blobs: a regular simplex of " + std::to_string(C) +
                         " means needs dim >= C-1 (got dim " + std::to_string(dim) + ")");
    }
    // Means: simplex vertices scaled from pairwise distance sqrt(2) to `separation`.
    const double scale = separation / std::sqrt(2.0);
    std::vector<std::vector<double>> means(C, std::vector<double>(dim, 0.0));
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t k = 1; k < C; ++k) means[c][k - 1] = scale * helmert_coord(k, c);
    }
    Dataset out;
    out.class_count = class_count;
    out.inputs = Tensor::zeros({C * n_per_class, dim});
    out.labels.resize(C * n_per_class);
    std::size_t row = 0;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            double* x = out.inputs.data.data() + row * dim;
            for (std::size_t j = 0; j < dim; ++j) x[j] = means[c][j] + rng.gaussian(0.0, 1.0);
            out.labels[row] = static_cast<int>(c);
        }
    }
    return out;
}

Dataset corrupt_labels(const Dataset& data, double rate, Rng& rng) {
    if (rate < 0.0 || rate > 1.0) throw InputError("label noise rate must be in [0, 1]");
    Dataset out = data;
    for (auto& y : out.labels) {
        if (rng.uniform01() < rate) {
            y = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(data.class_count)));
        }
    }
    return out;
}

Dataset cap_per_class(const Dataset& data, std::size_t n_per_class, Rng& rng) {
    if (n_per_class == 0) throw InputError("per-class cap must be >= 1");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.class_count));
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }
    std::vector<std::size_t> keep;
    for (auto& rows : by_class) {
        if (rows.size() <= n_per_class) {
            keep.insert(keep.end(), rows.begin(), rows.end());
        } else {
            for (std::size_t pick : rng.sample_without_replacement(rows.size(), n_per_class)) {
                keep.push_back(rows[pick]);
            }
        }
    }
    std::sort(keep.begin(), keep.end());
    return data.select(keep);
}

Dataset sample_subset(const Dataset& data, const SubsetSpec& spec, Rng& rng) {
    std::size_t want;
    if (spec.count > 0) {
        want = spec.count;
    } else {
        want = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(data.size())));
    }
    if (want < 1 || want > data.size()) {
        throw InputError("subset size " + std::to_string(want) + " outside [1, " +
                         std::to_string(data.size()) + "]");
    }
    return data.select(rng.sample_without_replacement(data.size(), want));
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path, std::size_t offset) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) {
        throw ParseError(path + ": truncated at byte offset " + std::to_string(offset));
    }
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

} // namespace

Tensor load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open IDX file: " + path);
    const std::uint32_t magic = read_be32(in, path, 0);
    if (magic != 0x00000803u) {
        std::ostringstream os;
        os << path << ": bad IDX image magic 0x" << std::hex << magic << " at byte offset 0";
        throw ParseError(os.str());
    }
    const std::uint32_t n = read_be32(in, path, 4);
    const std::uint32_t rows = read_be32(in, path, 8);
    const std::uint32_t cols = read_be32(in, path, 12);
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    Tensor out = Tensor::zeros({n, pixels});
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!in) {
            throw ParseError(path + ": truncated at byte offset " +
                             std::to_string(16 + static_cast<std::size_t>(i) * pixels));
        }
        double* row = out.data.data() + static_cast<std::size_t>(i) * pixels;
        for (std::size_t j = 0; j < pixels; ++j) row[j] = buf[j] / 255.0;
    }
    return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open IDX file: " + path);
    const std::uint32_t magic = read_be32(in, path, 0);
    if (magic != 0x00000801u) {
        std::ostringstream os;
        os << path << ": bad IDX label magic 0x" << std::hex << magic << " at byte offset 0";
        throw ParseError(os.str());
    }
    const std::uint32_t n = read_be32(in, path, 4);
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!in) throw ParseError(path + ": truncated label payload after byte offset 8");
    return std::vector<int>(buf.begin(), buf.end());
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    Dataset out;
    out.inputs = load_idx_images(images_path);
    out.labels = load_idx_labels(labels_path);
    if (out.labels.size() != out.inputs.rows()) {
        throw ParseError("IDX image/label count mismatch: " + std::to_string(out.inputs.rows()) +
                         " vs " + std::to_string(out.labels.size()));
    }
    const int mx = out.labels.empty() ? 0 : *std::max_element(out.labels.begin(), out.labels.end());
    out.class_count = mx + 1;
    out.validate();
    return out;
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file (no header row)");

    auto split = [](const std::string& s) {
        std::vector<std::string> parts;
        std::string cur;
        std::stringstream ss(s);
        while (std::getline(ss, cur, ',')) parts.push_back(cur);
        if (!s.empty() && s.back() == ',') parts.push_back("");
        return parts;
    };

    const std::vector<std::string> header = split(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) {
            label_idx = i;
            break;
        }
    }
    if (label_idx == header.size()) {
        try {
            const long v = std::stol(label_column);
            if (v >= 0 && static_cast<std::size_t>(v) < header.size()) label_idx = static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    if (label_idx == header.size()) {
        throw ParseError(path + ": no column named \"" + label_column + "\"");
    }

    Dataset out;
    std::vector<double> values;
    std::size_t row = 1;
    const std::size_t width = header.size();
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != width) {
            throw ParseError(path + ": row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
        }
        for (std::size_t c = 0; c < width; ++c) {
            double v;
            try {
                std::size_t used = 0;
                v = std::stod(cells[c], &used);
                while (used < cells[c].size() && std::isspace(static_cast<unsigned char>(cells[c][used]))) ++used;
                if (used != cells[c].size()) throw std::invalid_argument("trailing");
            } catch (...) {
                throw ParseError(path + ": non-numeric cell at row " + std::to_string(row) +
                                 ", column " + std::to_string(c + 1) + " (\"" + cells[c] + "\")");
            }
            if (c == label_idx) {
                const double r = std::round(v);
                if (r < 0 || std::abs(v - r) > 1e-9) {
                    throw ParseError(path + ": label at row " + std::to_string(row) +
                                     " is not a nonnegative integer");
                }
                out.labels.push_back(static_cast<int>(r));
            } else {
                values.push_back(v);
            }
        }
    }
    if (out.labels.empty()) throw ParseError(path + ": no data rows");
    out.inputs = Tensor({out.labels.size(), width - 1}, std::move(values));
    out.class_count = *std::max_element(out.labels.begin(), out.labels.end()) + 1;
    out.validate();
    return out;
}

} // namespace lure
