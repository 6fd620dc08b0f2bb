#pragma once

#include <cstdint>
#include <random>

namespace splatloc {

// Deterministic uniform generator. std::uniform_real_distribution is not
// bit-stable across standard libraries, so doubles are built directly from
// the mt19937_64 stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace splatloc
