#pragma once

// Counter-based deterministic generator used for all seeded fixtures.
// value(seed, counter) is a pure function (splitmix64 of seed xor a
// Weyl-incremented counter), so corpora are reproducible across
// platforms and languages from (seed, index) alone.

#include <cstdint>

namespace fermirg {

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1))), counter_(0) {}

    static std::uint64_t value(std::uint64_t seed, std::uint64_t counter) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (counter + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() { return value(seed_, counter_++); }

    /// Uniform in [0,1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0,n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

}  // namespace fermirg
