#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace potlab {

// Every random draw in the project flows from one master seed through named
// substreams, so adding a consumer (or reordering loops) never shifts the
// draws of an unrelated consumer. Substream seeds are FNV-1a mixes of the
// master seed, a stream label, and an index.

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t mix_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) {
    std::uint64_t h = fnv1a64(stream);
    h ^= master + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    // splitmix64 finalizer
    h ^= h >> 30; h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27; h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return h;
}

// mt19937_64 raw output is pinned by the standard; the distributions below are
// hand-rolled because std:: distribution algorithms are implementation-defined
// and would break byte-identical reruns across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    Rng(std::uint64_t master, std::string_view stream, std::uint64_t index = 0)
        : eng_(mix_seed(master, stream, index)) {}

    std::uint64_t bits() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t index(std::uint64_t n) {
        // rejection sampling keeps the draw exactly uniform
        std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do { x = bits(); } while (x >= limit);
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

} // namespace potlab
