#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace revar {

/// 64-bit Mersenne Twister with platform-independent uniform and normal
/// draws, so seeded runs reproduce bit-for-bit across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via the Box-Muller transform.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    /// Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// SplitMix64 finaliser.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed of sub-task `index` under `master`: mix(master XOR mix(index + 1)).
/// Independent of scheduling order, so parallel runs stay reproducible.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix_seed(master ^ mix_seed(index + 1));
}

/// Seed of a named sub-task: the index is the 64-bit FNV-1a hash of the name.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return derive_seed(master, h);
}

}  // namespace revar
