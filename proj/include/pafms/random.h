#ifndef PAFMS_RANDOM_H
#define PAFMS_RANDOM_H

#include <cstdint>
#include <random>

namespace pafms
{

/// Independent stream for (seed, index): mt19937_64 seeded through seed_seq
/// with the four 32-bit halves of both values.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

/// Uniform on [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n)
{
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

} // namespace pafms

#endif
