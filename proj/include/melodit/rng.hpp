#pragma once

#include <cstdint>
#include <random>

namespace melodit {

// splitmix64; used to derive independent seeds from (base, stream, substream)
// so training consumes a fixed rng stream per (step, slot) and resume needs
// no rng state in checkpoints.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0) {
    uint64_t s = base;
    uint64_t x = splitmix64(s);
    s ^= a * 0x9e3779b97f4a7c15ull;
    x ^= splitmix64(s);
    s ^= b * 0xd1b54a32d192ed03ull;
    x ^= splitmix64(s);
    return x;
}

// mt19937_64 (bit-exact across platforms) with hand-rolled transforms; the
// standard distributions are implementation-defined so we avoid them.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // [0,1)
    double uniform() {
        return (next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // 0..n-1, unbiased enough for our n
    int uniform_int(int n) {
        return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

    // Box-Muller; consumes exactly two uniforms per call
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace melodit
