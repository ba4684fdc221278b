#pragma once

#include <cstdint>
#include <random>

namespace biaslab {

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seeded random source with hand-written variate generators so that a given
/// seed yields the same stream on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Independent substream for (seed, index); used per trial / replicate so
    /// results do not depend on scheduling.
    static Rng substream(std::uint64_t seed, std::uint64_t index);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform();

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Gamma(shape, rate) with mean shape / rate.
    double gamma(double shape, double rate);

    double chi_square(double dof) { return gamma(0.5 * dof, 0.5); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace biaslab
