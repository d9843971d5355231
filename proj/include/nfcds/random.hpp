#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "nfcds/image.hpp"

namespace nfcds {

/// Counter-based generator: the k-th draw of stream (seed, stream) is a pure
/// function of (seed, stream, k), so results never depend on how many draws
/// other streams consumed. Normals use Box-Muller on 53-bit uniforms.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() noexcept { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Uniform in (0, 1).
    double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline ImageTensor standard_normal(const Shape& shape, std::uint64_t seed, std::uint64_t stream) {
    CounterRng rng(seed, stream);
    ImageTensor out(shape);
    for (auto& v : out.values()) v = rng.normal();
    return out;
}

// Stream identifiers. Keeping them distinct makes paired runs (same seed,
// different filtering) see identical random draws.
namespace streams {
inline constexpr std::uint64_t initial_state = 1;
inline constexpr std::uint64_t measurement = 2;
inline constexpr std::uint64_t prior_sample = 3;
inline constexpr std::uint64_t step_base = 1000;  // + step index
}  // namespace streams

}  // namespace nfcds
