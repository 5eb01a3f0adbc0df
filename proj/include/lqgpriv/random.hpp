#pragma once

// Seeded randomness utilities: the published seed-derivation mix and
// covariance-shaped Gaussian sampling.

#include <cstdint>
#include <random>

#include "lqgpriv/linalg.hpp"

namespace lqgpriv {

/// Child seed for stream `index` under `master`: the SplitMix64 output
/// function evaluated at master + (index + 1) * 0x9E3779B97F4A7C15.
/// Children depend only on (master, index), never on enumeration order.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Draws x ~ N(0, cov) by applying the symmetric PSD square root of cov to
/// standard normals, so singular covariances (including zero) are valid.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Matrix& cov) : transform_(psd_sqrt(cov)) {}

  template <class Rng>
  Vector sample(Rng& rng) {
    Vector z(transform_.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal_(rng);
    return transform_ * z;
  }

  const Matrix& transform() const { return transform_; }

 private:
  Matrix transform_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace lqgpriv
