#pragma once

#include <cmath>
#include <cstdint>

namespace cartlab {

// Counter-based generator state. All randomness in the library flows through
// this so that results are identical across platforms (the standard
// distributions are implementation-defined, so we roll the few draws we need
// by hand).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound) without modulo bias.
    std::uint64_t next_below(std::uint64_t bound) {
        std::uint64_t threshold = (0ULL - bound) % bound;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    // Standard normal via Box-Muller; draws are not cached so every call
    // consumes exactly two uniforms (keeps the stream position predictable).
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::uint64_t state_;
};

// Mixes a master seed with a stream rank into an independent seed. Used for
// per-tree seeds in forests so the schedule of parallel execution cannot
// change any tree.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t rank) {
    Rng mixer(master ^ (0xD1B54A32D192ED03ULL * (rank + 1)));
    return mixer.next_u64();
}

}  // namespace cartlab
