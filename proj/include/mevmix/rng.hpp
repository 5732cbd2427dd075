#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mevmix {

/// One splitmix64 step: advances the state and returns a mixed 64-bit word.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic pseudo-random stream derived from a master seed and a path of
/// stream identifiers (replication, chain, purpose, ...).  Streams with
/// different paths are statistically independent for practical purposes, and
/// the mapping (seed, path) -> stream is fixed, so results do not depend on
/// scheduling or on how many other streams were consumed in between.
class RngStream {
public:
    explicit RngStream(std::uint64_t master_seed,
                       std::uint64_t id0 = 0, std::uint64_t id1 = 0,
                       std::uint64_t id2 = 0) {
        std::uint64_t s = master_seed ^ 0x6a09e667f3bcc908ULL;
        splitmix64_next(s);
        s ^= id0;
        splitmix64_next(s);
        s ^= id1;
        splitmix64_next(s);
        s ^= id2;
        const std::uint64_t w0 = splitmix64_next(s);
        const std::uint64_t w1 = splitmix64_next(s);
        const std::uint64_t w2 = splitmix64_next(s);
        const std::uint64_t w3 = splitmix64_next(s);
        std::seed_seq seq{
            static_cast<std::uint32_t>(w0), static_cast<std::uint32_t>(w0 >> 32),
            static_cast<std::uint32_t>(w1), static_cast<std::uint32_t>(w1 >> 32),
            static_cast<std::uint32_t>(w2), static_cast<std::uint32_t>(w2 >> 32),
            static_cast<std::uint32_t>(w3), static_cast<std::uint32_t>(w3 >> 32)};
        engine_.seed(seq);
    }

    /// Uniform draw on the open interval (0, 1).
    double uniform() {
        double u;
        do {
            u = unif_(engine_);
        } while (u <= 0.0 || u >= 1.0);
        return u;
    }

    /// Standard normal draw.
    double normal() { return norm_(engine_); }

    /// Standard exponential draw (rate 1).
    double exponential() { return -std::log(uniform()); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
    std::normal_distribution<double> norm_{0.0, 1.0};
};

} // namespace mevmix
