#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace kbd {

// 64-bit FNV-1a. Used for stable action ids and sub-seed derivation; must not
// change across builds, so std::hash (implementation defined) is out.
inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic RNG facade. All sampling in the library goes through this so
// that runs are reproducible byte for byte: std::uniform_int_distribution and
// friends are not bit-stable across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    // uniform in [0, 1)
    double uniform() {
        // 53 random bits -> dyadic rational in [0,1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform index in [0, n); n must be > 0
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n));
    }

    double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (spare discarded to keep state minimal)
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t bits() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

// One master seed fans out to per-component streams by name.
inline std::uint64_t subseed(std::uint64_t master, std::string_view component) {
    return splitmix64(master ^ fnv1a(component));
}

// Combine a stream base with an index (episode number etc.).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ splitmix64(index ^ 0x5bf03635ef0f63f1ull));
}

}  // namespace kbd
