#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "rulsurv/common.hpp"

namespace rulsurv {

// xoshiro256++ seeded through splitmix64. Self-contained so that seeded
// runs produce identical streams on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            // splitmix64 step
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in the open interval (0, 1).
    double uniform_open() {
        double u = uniform();
        while (u == 0.0) u = uniform();
        return u;
    }

    /// Uniform integer in [0, n).
    std::size_t uniform_below(std::size_t n) {
        require(n > 0, "Rng::uniform_below: n must be positive");
        return static_cast<std::size_t>(next_u64() % n);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // Box-Muller
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Weibull draw via inversion: scale * (-ln U)^(1/shape).
    double weibull(double shape, double scale) {
        require(shape > 0 && scale > 0, "Rng::weibull: shape and scale must be positive");
        return scale * std::pow(-std::log(uniform_open()), 1.0 / shape);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_below(i)]);
        }
    }

    /// Deterministic sub-stream, independent of calls made on this stream.
    static Rng fork(std::uint64_t seed, std::uint64_t stream) {
        return Rng(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4]{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rulsurv
