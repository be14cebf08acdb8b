#pragma once

// Deterministic random-number plumbing.
//
// Frames are independent work units: each one draws from its own substream
// keyed by (seed, frame), so runs are reproducible bit-for-bit regardless of
// evaluation order or thread count. Gaussians use an explicit Box-Muller on
// mt19937_64 because std::normal_distribution's algorithm is
// implementation-defined and would break cross-platform determinism.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace xepr {

// SplitMix64: small, well-mixed hash used to derive substream seeds.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

class GaussianRng {
  public:
    explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

    static GaussianRng for_stream(std::uint64_t seed, std::uint64_t stream) {
        return GaussianRng(substream_seed(seed, stream));
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; caches the second deviate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        spare_ = mag * std::sin(ang);
        have_spare_ = true;
        return mag * std::cos(ang);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace xepr
