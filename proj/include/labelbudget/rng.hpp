#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>

namespace labelbudget {

// splitmix64 (Steele, Lea, Flood). Every random decision in the toolkit is
// derived from this generator so results are identical across platforms and
// standard libraries.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; one variate per call, the sibling is discarded.
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

private:
    std::uint64_t state_;
};

/// One splitmix64 finalization step; used to combine hash words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over the bytes of `s`.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for a shuffle keyed by (name, seed): mix64(fnv1a64(name) ^ mix64(seed)).
constexpr std::uint64_t keyed_seed(std::string_view name, std::uint64_t seed) noexcept {
    return mix64(fnv1a64(name) ^ mix64(seed));
}

/// Combines two 64-bit words into one (order-sensitive).
constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(a ^ (mix64(b) + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

/// In-place Fisher-Yates: for i = n-1 .. 1, j = next() % (i + 1), swap(i, j).
template <typename T>
void fisher_yates(std::span<T> items, SplitMix64& rng) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next() % (i + 1));
        using std::swap;
        swap(items[i], items[j]);
    }
}

/// Number of items selected by a fraction of `n`: ceiling, minimum 1, maximum n.
inline std::size_t fraction_count(double fraction, std::size_t n) noexcept {
    if (n == 0) return 0;
    // The epsilon absorbs binary representation error (0.6 * 10 must give 6).
    auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    if (k < 1) k = 1;
    if (k > n) k = n;
    return k;
}

}  // namespace labelbudget
