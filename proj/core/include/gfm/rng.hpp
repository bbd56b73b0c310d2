#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace gfm {

/// Stream derivation for reproducible sub-seeds.
///
/// derive_seed(s, k) = splitmix64(splitmix64(s) ^ splitmix64(k + 0x9E3779B97F4A7C15)).
/// Every consumer that needs an independent random stream (one per task,
/// per trajectory, per experiment cell) asks for derive_seed(parent, k), so
/// results never depend on the order in which streams are consumed.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Deterministic random source: std::mt19937_64 as the bit generator, with
/// uniforms and normals computed here (53-bit uniforms, Box-Muller normals)
/// so the values do not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Uniform integer in [0, bound). Unbiased (rejection sampling).
    std::uint64_t below(std::uint64_t bound);

    /// Fisher-Yates shuffle of [first, last).
    template <class It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace gfm
