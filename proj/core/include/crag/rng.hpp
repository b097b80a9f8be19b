#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "crag/text.hpp"

namespace crag {

/// Deterministic RNG for sampling and shuffles. mt19937_64 has a
/// standard-specified sequence, and the bounded draw below avoids the
/// implementation-defined std::uniform_int_distribution, so results are
/// identical across platforms and toolchains.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    /// Unbiased draw from [0, n). n must be > 0.
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = gen_();
            if (r >= threshold) return r % n;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[bounded(i)]);
        }
    }

    /// First n elements of a uniform permutation (partial Fisher-Yates).
    template <typename T>
    std::vector<T> sample(std::vector<T> pool, std::size_t n) {
        if (n > pool.size()) n = pool.size();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(bounded(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(n);
        return pool;
    }

private:
    std::mt19937_64 gen_;
};

/// Derives a sub-seed so per-item draws stay independent of batch order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
    std::uint64_t h = fnv1a64(salt);
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

}  // namespace crag
