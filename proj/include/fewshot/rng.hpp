#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace fewshot {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

/// Counter-based random stream: the k-th draw is a pure function of (seed, k),
/// so child streams derived from (seed, label) are reproducible regardless of
/// the order in which siblings are consumed.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        return detail::splitmix64(seed_ ^ (counter_++ * 0xD6E8FEB86659FD93ULL));
    }

    /// Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n), modulo-bias free.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller; two uniforms per draw.
    double next_gaussian() {
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    RngStream child(std::string_view label) const {
        return RngStream(seed_ ^ detail::fnv1a64(label));
    }

    RngStream child(std::uint64_t index) const {
        return RngStream(seed_ ^ detail::splitmix64(index + 0x51ED270B0A9BULL));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct values from [0, n), in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::size_t> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace fewshot
