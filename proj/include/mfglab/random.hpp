#pragma once

#include "mfglab/types.hpp"

#include <cstdint>
#include <random>

namespace mfglab {

using Rng = std::mt19937_64;

/// Uniform sample from the closed ball of radius r in R^d.
Vec uniform_ball(Rng& rng, int d, double r);

/// m points drawn independently from uniform_ball, flattened.
Vec uniform_ball_cloud(Rng& rng, int m, int d, double r);

/// Uniform sample from [lo, hi).
double uniform(Rng& rng, double lo, double hi);

}  // namespace mfglab
