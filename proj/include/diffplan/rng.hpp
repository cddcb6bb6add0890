#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>

namespace diffplan {

// Deterministic random stream. Gaussian draws use Box-Muller on top of
// mt19937_64 instead of std::normal_distribution, whose output is
// implementation-defined; every artifact we write must be reproducible
// from a seed alone.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer on [0, n). Requires n > 0.
    uint64_t uniform_int(uint64_t n);

    // Standard normal draw.
    double normal();

    void save(std::ostream& os) const;
    void load(std::istream& is);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// SplitMix64 finalizer; derives per-episode / per-stage seeds from a base seed.
uint64_t mix_seed(uint64_t base, uint64_t stream);

}  // namespace diffplan
