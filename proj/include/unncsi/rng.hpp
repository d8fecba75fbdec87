// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace unncsi {

// SplitMix64 stream. Bit-exact on every platform, which the seed and
// report reproduction rely on.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Top 53 bits mapped to [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one draw per call, the sine branch is discarded so that
    // the stream position is a pure function of the call count.
    double normal()
    {
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::uint64_t state_;
};

// Deterministic seed derivation from a base seed and integer tags.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::int64_t> tags)
{
    SplitMix64 mix(base);
    std::uint64_t out = mix.next();
    for (auto t : tags) {
        SplitMix64 step(out ^ static_cast<std::uint64_t>(t) * 0xD1B54A32D192ED03ULL);
        out = step.next();
    }
    return out;
}

} // namespace unncsi
