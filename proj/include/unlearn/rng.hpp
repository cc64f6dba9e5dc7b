#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace unlearn {

// splitmix64; the one fixed PRNG used everywhere so every draw is a pure,
// documented function of (seed, stream name, index, position).
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Stream-splitting rule: substream (seed, name, index) starts from
// mix(seed ^ mix(fnv1a(name) + index)). One substream per dataset row /
// neuron row, so changing m, n or d never reshuffles earlier rows.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name, std::uint64_t index) {
    std::uint64_t s = fnv1a64(name) + index;
    std::uint64_t inner = splitmix64_next(s);
    std::uint64_t t = seed ^ inner;
    return splitmix64_next(t);
}

struct RngStream {
    std::uint64_t state;

    explicit RngStream(std::uint64_t s) : state(s) {}
    RngStream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0)
        : state(derive_seed(seed, name, index)) {}

    std::uint64_t next_u64() { return splitmix64_next(state); }

    // uniform on [0, 1), 53 random bits
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0, 1], safe as a log argument
    double next_uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // standard normal via Box-Muller (cosine branch only; two u64 per draw)
    double next_normal() {
        const double u1 = next_uniform_pos();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // fair coin as +1/-1
    int next_sign() { return (next_u64() >> 63) ? 1 : -1; }
};

}  // namespace unlearn
