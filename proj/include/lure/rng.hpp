#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lure {

/// SplitMix64 step. Used both as a seed scrambler and as the counter scheme
/// that derives the named per-run seed streams from one master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Named seed streams derived from a master seed. Stream i is the i-th output
/// of the SplitMix64 sequence seeded with the master, counted from 1.
struct SeedStreams {
    std::uint64_t data;     // stream partition, label noise, caps, replay buffer
    std::uint64_t init;     // initial parameter draws
    std::uint64_t strategy; // subset pi, reinitialization draws, random scores
    std::uint64_t shuffle;  // per-epoch mini-batch shuffles
    std::uint64_t metrics;  // attack restarts, parameter noise, input corruption

    static SeedStreams from_master(std::uint64_t master) {
        std::uint64_t s = master;
        SeedStreams out{};
        out.data = splitmix64(s);
        out.init = splitmix64(s);
        out.strategy = splitmix64(s);
        out.shuffle = splitmix64(s);
        out.metrics = splitmix64(s);
        return out;
    }
};

/// Deterministic RNG with platform-independent draw functions. The standard
/// distributions are implementation-defined, so uniform/gaussian draws are
/// derived from raw mt19937_64 output directly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard Box-Muller; the sine branch is discarded so the stream
    /// advances by exactly two raw draws per call.
    double gaussian(double mean, double stddev) {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    /// Uniform integer in [0, n). Rejection sampling, exactly uniform.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t nn = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = (UINT64_MAX / nn) * nn;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % nn);
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

    /// k distinct indices drawn uniformly from [0, n), ascending order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::mt19937_64 gen_;
};

} // namespace lure
