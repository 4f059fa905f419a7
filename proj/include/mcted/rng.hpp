#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace mcted {

// splitmix64-based generator. Self-contained so streams are identical across
// platforms and standard-library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double gaussian(double mean, double stddev) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        const double theta = 6.283185307179586476925287 * uniform();
        return mean + stddev * r * std::cos(theta);
    }

    // [0, n), n > 0. Rejection sampling keeps the draw unbiased.
    int uniform_int(int n) {
        const uint64_t bound = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<int>(x % bound);
    }

    // [lo, hi] inclusive
    int uniform_range(int lo, int hi) { return lo + uniform_int(hi - lo + 1); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<size_t>(uniform_int(static_cast<int>(v.size())))];
    }

private:
    uint64_t state_;
};

// One master seed fans out to named sub-streams (init, shuffle, dropout,
// generator, ...) so each component is independently reproducible.
inline uint64_t derive_seed(uint64_t master, std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ull ^ master;
    for (const char c : label) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ull;
    }
    // final avalanche
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return h;
}

inline uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index) {
    uint64_t h = derive_seed(master, label) ^ (0x9e3779b97f4a7c15ull * (index + 1));
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ull;
    h ^= h >> 33;
    return h;
}

}  // namespace mcted
