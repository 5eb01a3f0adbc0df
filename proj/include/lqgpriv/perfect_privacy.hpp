#pragma once

// Injection sequences that deviate the server's knowledge at zero control
// cost. Perfect-state mode perturbs the state the server sees along kernel
// directions that the feedback gain annihilates; imperfect-state mode
// perturbs the transmitted measurement so the gained deviation K_k delta_k
// is nonzero yet killed by A one step later.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lqgpriv/kalman.hpp"
#include "lqgpriv/model.hpp"
#include "lqgpriv/random.hpp"
#include "lqgpriv/riccati.hpp"

namespace lqgpriv {

/// Orthonormal basis of the numerical kernel of X (possibly zero columns).
/// Columns v satisfy |X v| <= tol * sigma_max(X).
inline Matrix kernel_basis(const Matrix& x, double tol = 1e-10) {
  const Eigen::Index cols = x.cols();
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  if (sigma_max <= 0.0) return Matrix::Identity(cols, cols);
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol * sigma_max) ++kept;
  }
  return svd.matrixV().rightCols(cols - kept);
}

enum class ZeroLossCondition {
  KernelOfA,    // delta in ker(A)
  KernelOfBtSA, // S_{k+1} A delta in ker(B')
  KernelOfAK,   // delta in ker(A K_k) with K_k delta != 0
};

enum class PerfectPrivacyMode { PerfectState, ImperfectState };

struct PerfectPrivacyDelta {
  Vector delta;
  ZeroLossCondition condition;
};

/// Deterministic (seeded) injection schedule. delta_seq is index-aligned
/// with the injection time: perfect-state entries live at k = 0..T-1,
/// imperfect-state entries at k = 1..T; unused slots hold zero vectors.
struct PerfectPrivacyPlan {
  PerfectPrivacyMode mode = PerfectPrivacyMode::ImperfectState;
  std::vector<Vector> delta_seq;
  std::vector<ZeroLossCondition> certificate;
};

namespace detail {

// Seeded unit vector in the span of an orthonormal basis.
template <class Rng>
Vector sample_in_span(const Matrix& basis, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector coeffs(basis.cols());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs(i) = normal(rng);
  Vector v = basis * coeffs;
  const double norm = v.norm();
  if (norm <= 1e-12) {  // degenerate draw; any basis column works
    v = basis.col(0);
    return v;
  }
  return v / norm;
}

}  // namespace detail

/// Zero-loss state perturbation at time k for the perfect-state scenario:
/// a nonzero delta with L_k delta = 0, drawn from ker(A) when A is rank
/// deficient, else from ker(B' S_{k+1} A). Throws when both kernels are
/// trivial.
inline PerfectPrivacyDelta perfect_state_delta(const LqgSolution& lqg,
                                               const SystemModel& model, int k,
                                               std::uint64_t seed,
                                               double magnitude = 1.0) {
  std::mt19937_64 rng(seed);
  Matrix basis = kernel_basis(model.A);
  ZeroLossCondition condition = ZeroLossCondition::KernelOfA;
  if (basis.cols() == 0) {
    basis = kernel_basis(model.B.transpose() * lqg.S_at(k + 1) * model.A);
    condition = ZeroLossCondition::KernelOfBtSA;
  }
  if (basis.cols() == 0) {
    throw std::runtime_error("perfect_state_delta: no zero-loss direction at k=" +
                             std::to_string(k));
  }
  Vector delta = magnitude * detail::sample_in_span(basis, rng);
  const Matrix& gain = lqg.L_at(k);
  const double residual = (gain * delta).cwiseAbs().maxCoeff();
  if (residual > 1e-10 * std::max(1.0, magnitude) * std::max(1.0, max_abs(gain))) {
    throw std::runtime_error("perfect_state_delta: gain does not annihilate "
                             "the sampled direction at k=" + std::to_string(k));
  }
  return {delta, condition};
}

/// Zero-loss measurement perturbation at time k for the main scenario:
/// delta in ker(A K_k) with K_k delta != 0. Requires ker(A K_k) strictly
/// larger than ker(K_k), i.e. rank(A K_k) < rank(K_k).
inline Vector imperfect_state_delta(const FilterSolution& filt,
                                    const SystemModel& model, int k,
                                    std::uint64_t seed,
                                    double magnitude = 1.0) {
  const Matrix& gain = filt.K_at(k);
  const Matrix gained = model.A * gain;  // n x p
  if (numerical_rank(gained, 1e-10) >= numerical_rank(gain, 1e-10)) {
    throw std::runtime_error(
        "imperfect_state_delta: condition unsatisfiable at k=" +
        std::to_string(k) + ", ker(A K) does not exceed ker(K)");
  }
  const Matrix basis = kernel_basis(gained);
  std::mt19937_64 rng(seed);
  Vector delta;
  for (int attempt = 0; attempt < 16; ++attempt) {
    delta = detail::sample_in_span(basis, rng);
    if ((gain * delta).norm() >= 1e-8) break;
  }
  if ((gain * delta).norm() < 1e-8) {
    throw std::runtime_error(
        "imperfect_state_delta: sampled directions all vanish under K at k=" +
        std::to_string(k));
  }
  delta *= magnitude;
  if ((gained * delta).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, magnitude)) {
    throw std::runtime_error(
        "imperfect_state_delta: kernel residual too large at k=" +
        std::to_string(k));
  }
  return delta;
}

inline PerfectPrivacyPlan make_perfect_state_plan(const LqgSolution& lqg,
                                                  const SystemModel& model,
                                                  int T, std::uint64_t seed,
                                                  double magnitude = 1.0) {
  PerfectPrivacyPlan plan;
  plan.mode = PerfectPrivacyMode::PerfectState;
  plan.delta_seq.assign(T + 1, Vector::Zero(model.n()));
  plan.certificate.resize(T + 1, ZeroLossCondition::KernelOfA);
  for (int k = 0; k < T; ++k) {
    auto d = perfect_state_delta(lqg, model, k, mix_seed(seed, k), magnitude);
    plan.delta_seq[k] = std::move(d.delta);
    plan.certificate[k] = d.condition;
  }
  return plan;
}

inline PerfectPrivacyPlan make_imperfect_state_plan(const FilterSolution& filt,
                                                    const SystemModel& model,
                                                    int T, std::uint64_t seed,
                                                    double magnitude = 1.0) {
  PerfectPrivacyPlan plan;
  plan.mode = PerfectPrivacyMode::ImperfectState;
  plan.delta_seq.assign(T + 1, Vector::Zero(model.p()));
  plan.certificate.resize(T + 1, ZeroLossCondition::KernelOfAK);
  for (int k = 1; k <= T; ++k) {
    plan.delta_seq[k] =
        imperfect_state_delta(filt, model, k, mix_seed(seed, k), magnitude);
  }
  return plan;
}

}  // namespace lqgpriv
