#pragma once

#include <cstdint>
#include <random>

namespace cocopipe {

// SplitMix64 finalizer; good avalanche for seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_seed(std::uint64_t seed, std::uint64_t image_id,
                               std::uint64_t copy_index) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ image_id);
    h = mix64(h ^ copy_index);
    return h;
}

// mt19937_64 with an explicit u64 -> [0,1) mapping so draws are bit-identical
// across platforms and standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace cocopipe
