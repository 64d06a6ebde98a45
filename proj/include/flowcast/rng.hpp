#pragma once

#include <cstdint>
#include <cmath>

namespace flowcast {

// Deterministic, platform-independent RNG built on the splitmix64 state
// transition. All stochastic output in the project flows through this type so
// results are bit-reproducible for a fixed seed regardless of stdlib version
// or thread scheduling.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline std::uint64_t mix_u64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Seed for the RNG stream of one (sample, forecast step) pair. Samples and
// steps get statistically independent streams from one master seed, so
// ensembles are reproducible no matter how work is scheduled across threads.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t sample_index,
                                 std::uint64_t forecast_step) {
    std::uint64_t h = mix_u64(master ^ 0xD1B54A32D192ED03ull);
    h = mix_u64(h ^ (sample_index + 0x9E3779B97F4A7C15ull));
    h = mix_u64(h ^ (forecast_step + 0x8CB92BA72F3D8DD7ull));
    return h;
}

}  // namespace flowcast
