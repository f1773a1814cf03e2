#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace umbra {

/// Deterministic random stream. mt19937_64 output is pinned by the standard;
/// the bounded/normal draws are hand-rolled here because the std::*
/// distributions are implementation-defined and would break cross-platform
/// reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, n), n > 0 (Lemire multiply-shift).
    std::uint64_t bounded(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform in (0, 1].
    double uniform_pos() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u = uniform_pos();
        double v = uniform_pos();
        double radius = std::sqrt(-2.0 * std::log(u));
        double angle = 2.0 * 3.14159265358979323846 * v;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace umbra
