#pragma once

#include <cstdint>
#include <string_view>

namespace latim {

// Counter-based generator built on the SplitMix64 finalizer (Steele, Lea and
// Flood 2014). Draw k of stream s under seed is mix(seed, s, k), so any draw can
// be reproduced without replaying earlier ones, and separate tensors get
// independent streams keyed by name.
class counter_rng {
public:
    counter_rng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(seed ^ mix64(stream + 0x9E3779B97F4A7C15ULL))) {}

    counter_rng(std::uint64_t seed, std::string_view stream_name) noexcept
        : counter_rng(seed, hash_name(stream_name)) {}

    std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix64(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform(std::uint64_t counter) const noexcept {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    // Uniform integer on [0, bound) by 128-bit multiply-shift.
    std::uint64_t below(std::uint64_t counter, std::uint64_t bound) const noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(counter)) * bound) >> 64);
    }

    // Standard normal via Box-Muller on draws (2k, 2k + 1).
    double normal(std::uint64_t k) const noexcept;

    static std::uint64_t mix64(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // FNV-1a, 64-bit.
    static std::uint64_t hash_name(std::string_view s) noexcept {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001B3ULL;
        }
        return h;
    }

private:
    std::uint64_t key_;
};

} // namespace latim
