#include "mfglab/random.hpp"

#include <cmath>

namespace mfglab {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec uniform_ball(Rng& rng, int d, double r) {
  // rejection from the cube keeps the sampler free of distribution-specific
  // transforms whose output differs between standard libraries
  Vec x(d);
  while (true) {
    for (int k = 0; k < d; ++k) x(k) = uniform(rng, -1.0, 1.0);
    if (d > 3) {
      // rejection gets slow in high dimension; scale a direction instead
      const double n = x.norm();
      if (n == 0.0) continue;
      return x / n * r * std::pow(uniform(rng, 0.0, 1.0), 1.0 / d);
    }
    if (x.squaredNorm() <= 1.0) return r * x;
  }
}

Vec uniform_ball_cloud(Rng& rng, int m, int d, double r) {
  Vec q(m * d);
  for (int i = 0; i < m; ++i) q.segment(i * d, d) = uniform_ball(rng, d, r);
  return q;
}

}  // namespace mfglab
