#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace faramtn {

// mt19937_64 with hand-rolled distributions. The standard engine sequence is
// pinned by the C++ standard, but the standard distributions are not; doing
// the mapping ourselves keeps every seeded run bit-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Uniform integer in [0, n), n >= 1. Rejection-sampled to avoid modulo bias.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return u01() < p; }

    // Box-Muller; one value per call, the pair's twin is discarded.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = u01();
        while (u1 <= 0.0) u1 = u01();
        const double u2 = u01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_int(i)]);
        }
    }

    // Stable per-item substream, independent of how many draws the parent made.
    static Rng derive(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace faramtn
