#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace pelm::rng {

/// 64-bit avalanche finalizer (murmur3 fmix64). Stateless.
inline std::uint64_t hash64(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    return z;
}

/// Deterministic random stream seeded by a key tuple (splitmix64 core).
///
/// Every consumer derives its own stream from (seed, counter...) keys, so
/// results do not depend on evaluation order or thread schedule, and the
/// sequence is identical across platforms.
class Stream {
public:
    Stream(std::initializer_list<std::uint64_t> keys) {
        state_ = 0x9e3779b97f4a7c15ULL;
        for (std::uint64_t k : keys) state_ = hash64(state_ ^ hash64(k + 0x165667b19e3779f9ULL));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal deviate (Box-Muller, pair cached).
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1) never hits log(0)
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n) without modulo bias.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("rng::Stream::next_below: n must be positive");
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    /// Fisher-Yates shuffle. std::shuffle is implementation-defined, this is not.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace pelm::rng
