#include "lure/rng.hpp"

#include <algorithm>

#include "lure/errors.hpp"

namespace lure {

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw InputError("cannot sample " + std::to_string(k) + " items from " + std::to_string(n));
    // Partial Fisher-Yates over an index vector, then sorted for stable output.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + uniform_index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace lure
