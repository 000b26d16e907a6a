#pragma once

#include <cmath>
#include <cstdint>

namespace graphlq {

// Deterministic random stream: splitmix64 core with a Marsaglia-polar Gaussian on top.
// std::normal_distribution is implementation-defined, so simulation draws go through
// this generator to keep reports reproducible for a given seed and build.
//
// Substream scheme: trial k of a run seeded with s draws from substream(s, k), which
// seeds a fresh generator with one splitmix64 step of s + (k+1)*0x9e3779b97f4a7c15.
// Trials are therefore independent of thread scheduling and can be fanned out.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        Rng mixer(seed + (index + 1) * golden_);
        return Rng(mixer.next_u64());
    }

    std::uint64_t next_u64() {
        state_ += golden_;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via the polar method; the second deviate of a pair is cached.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, q;
        do {
            u = 2.0 * next_unit() - 1.0;
            v = 2.0 * next_unit() - 1.0;
            q = u * u + v * v;
        } while (q >= 1.0 || q == 0.0);
        const double f = std::sqrt(-2.0 * std::log(q) / q);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

  private:
    static constexpr std::uint64_t golden_ = 0x9e3779b97f4a7c15ull;
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace graphlq
