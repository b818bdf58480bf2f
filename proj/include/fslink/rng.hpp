#pragma once

#include <cstdint>

namespace fslink {

// splitmix64 step; also used to derive independent stage seeds from one
// user-facing seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t s = seed ^ (tag * 0xd1b54a32d192ed03ULL);
    return splitmix64(s);
}

// Small deterministic generator. std::uniform_int_distribution is
// implementation-defined, so sampling helpers are hand-rolled to keep
// generated corpora bit-identical across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // warm up so that small seeds do not produce correlated leading draws
        next();
        next();
    }

    std::uint64_t next() { return splitmix64(state_); }

    // uniform integer in [0, n)
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) return 0;
        // rejection-free multiply-shift (Lemire); bias < 2^-64 per draw is
        // irrelevant at the corpus sizes used here
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    // uniform double in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
};

// Counter-based uniform draw for a (seed, id_a, id_b) triple; used where
// results must not depend on thread schedule.
inline double pair_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = seed;
    s ^= splitmix64(a += 0x632be59bd9b4e019ULL);
    s ^= splitmix64(b += 0x9e6c63d0a9634b35ULL);
    return static_cast<double>(splitmix64(s) >> 11) * 0x1.0p-53;
}

}  // namespace fslink
