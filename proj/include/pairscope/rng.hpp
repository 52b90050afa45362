#ifndef PAIRSCOPE_RNG_HPP
#define PAIRSCOPE_RNG_HPP

// Seeded randomness. Every stream is a SplitMix64 generator keyed by the
// master seed plus a tuple of integers naming the stream (block epoch,
// segment, element, ...). Distributions are written out here rather than
// taken from <random> because the standard leaves their algorithms
// unspecified, and outputs must not change with the standard library.

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <utility>

#include "constants.hpp"

namespace pairscope {

namespace stream_tag {
inline constexpr std::uint64_t block = 1;
inline constexpr std::uint64_t band = 2;
inline constexpr std::uint64_t schedule = 3;
inline constexpr std::uint64_t emission = 4;
inline constexpr std::uint64_t sparse_noise = 5;
inline constexpr std::uint64_t warmup = 6;
} // namespace stream_tag

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for the stream named by `keys` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) noexcept
{
    std::uint64_t h = splitmix64_mix(master + 0x9e3779b97f4a7c15ULL);
    for (auto k : keys)
        h = splitmix64_mix(h ^ splitmix64_mix(k + 0x9e3779b97f4a7c15ULL));
    return h;
}

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64_mix(state_);
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() noexcept
    {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform phase on (-pi, pi].
    double phase() noexcept { return kPi - kTwoPi * uniform(); }

    std::uint64_t below(std::uint64_t n) noexcept
    {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

    double exponential(double mean = 1.0) noexcept { return -mean * std::log(uniform_open()); }

    /// Standard normal pair via Box-Muller.
    std::pair<double, double> normal_pair() noexcept
    {
        const double r = std::sqrt(-2.0 * std::log(uniform_open()));
        const double t = kTwoPi * uniform();
        return {r * std::cos(t), r * std::sin(t)};
    }

    /// Circular complex Gaussian with E|z|^2 = power.
    std::complex<double> complex_gaussian(double power) noexcept
    {
        const auto [a, b] = normal_pair();
        const double s = std::sqrt(power / 2.0);
        return {s * a, s * b};
    }

    double normal() noexcept { return normal_pair().first; }

    /// Number of failures before the first success of a Bernoulli(p) sequence.
    std::uint64_t geometric(double p) noexcept
    {
        if (p >= 1.0)
            return 0;
        const double g = std::floor(std::log(uniform_open()) / std::log1p(-p));
        if (g >= 1.8e19)
            return std::numeric_limits<std::uint64_t>::max();
        return static_cast<std::uint64_t>(g);
    }

private:
    std::uint64_t state_;
};

} // namespace pairscope

#endif
