#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace starrisk {

/// Seeded generator with library-independent real mapping, so reports are reproducible
/// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace starrisk
