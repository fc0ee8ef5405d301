#pragma once
#include <cmath>
#include <cstdint>
#include <numbers>

namespace kep {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

/// Key of the substream used by simulation repeat `repeat`.
constexpr std::uint64_t substream_key(std::uint64_t seed, std::uint64_t repeat) { return seed ^ repeat; }

/**
 * Counter-based generator: the i-th draw of stream (key, stream) is
 * mix64(base + i * 0x9e3779b97f4a7c15) with base = mix64(key) ^ mix64(~stream).
 * Uniforms take the top 53 bits; normals use Box-Muller with the cosine
 * draw first. The whole sequence is a pure function of (key, stream, i).
 */
class CounterRng
{
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t stream = 0)
        : base_(mix64(key) ^ mix64(~stream))
    {}

    std::uint64_t next_u64() { return mix64(base_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound)
    {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace kep
