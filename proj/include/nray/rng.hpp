#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nray {

/// Stafford variant-13 finalizer of splitmix64. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

/// Counter-based sub-stream derivation: mixes a stream index into a master
/// seed. Streams for different indices are independent for practical
/// purposes, and adding streams never perturbs existing ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix64(master + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

/// Deterministic uniform in [0, 1) from the top 53 bits of one draw.
/// std::uniform_real_distribution is implementation-defined; this mapping is
/// bit-identical across platforms.
inline double uniform_unit(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& eng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(eng);
}

/// Standard-exponential draw, inverse-CDF method.
inline double exponential_unit(std::mt19937_64& eng) {
    double u = uniform_unit(eng);
    // u == 0 would map to +inf; nudge to the smallest representable draw.
    return -std::log(u > 0.0 ? u : 0x1.0p-53);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace nray
