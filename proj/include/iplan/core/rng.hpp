#pragma once

#include <cstdint>
#include <random>

namespace iplan {

// All stochastic operations take an explicit engine so sessions and training
// runs are reproducible from a seed.
using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo = 0.0, double hi = 1.0)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace iplan
