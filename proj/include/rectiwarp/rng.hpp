#pragma once

#include <cstdint>
#include <random>

namespace rectiwarp {

// Deterministic random source. Draws are converted to doubles with a fixed
// bit-level rule instead of std::uniform_real_distribution, whose output
// is implementation-defined; identical seeds therefore produce identical
// streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with 53 random bits.
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // Uniform integer in [0, n); n must be positive. Uses rejection
    // sampling, so the result is unbiased.
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

} // namespace rectiwarp
