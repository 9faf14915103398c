#pragma once

#include <cmath>
#include <cstdint>

namespace tsf {

/// Deterministic pseudo-random generator (splitmix64 core).
/// Every random quantity in the library is drawn from one of these, seeded
/// from a single 64-bit value, so runs reproduce byte-for-byte. split()
/// derives independent substreams (per fold, per frame, ...) without
/// coupling their sequences.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Independent stream derived from this generator's seed and a stream id.
    Rng split(std::uint64_t stream) const {
        Rng r(state_ + 0x632be59bd9b4e019ull * (stream + 1));
        r.next_u64();
        return r;
    }

    /// Uniform in [0, 1).
    double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller; the paired draw is kept for the next call.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace tsf
