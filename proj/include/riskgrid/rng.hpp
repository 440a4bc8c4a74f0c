#ifndef RISKGRID_RNG_HPP
#define RISKGRID_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace riskgrid {

// splitmix64 step; used to derive independent substreams from one user seed
// so that reordering consumers never shifts another consumer's stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable substream seed: mixes the base seed with a label and an index.
inline std::uint64_t substream_seed(std::uint64_t base, std::string_view label,
                                    std::uint64_t index = 0) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a 64 offset
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return splitmix64(base ^ splitmix64(h ^ splitmix64(index)));
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::string_view label,
                                std::uint64_t index = 0) {
    return std::mt19937_64(substream_seed(base, label, index));
}

// Deterministic uniform double in [0,1). std::uniform_real_distribution is
// implementation-defined, so draw bits directly.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller standard normal from the deterministic uniform above.
// One value per call; the pair's second half is discarded to keep the
// stream position independent of call parity.
inline double normal01(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
}

// Fisher-Yates shuffle with the deterministic draw (std::shuffle's usage of
// the engine is implementation-defined).
template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(v[i], v[j]);
    }
}

} // namespace riskgrid

#endif
