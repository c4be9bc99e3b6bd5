#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace epgnn {

// FNV-1a, used for config hashes, artifact digests, and stable string bucketing.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// splitmix64: used to derive independent stream seeds from (seed, salt) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG. Wraps mt19937_64 (whose sequence the standard pins down)
// and maps outputs itself, so draws are bit-stable across platforms; the
// std::*_distribution classes are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double next_unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // unbiased draw from [0, n), n > 0
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // derive a child stream seed; mix(a, b) != mix(b, a)
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace epgnn
