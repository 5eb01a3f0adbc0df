#pragma once

// Deviation analysis of the injected-noise scheme: the deviation covariance
// of the public estimate against the true one, its recursive lower bound,
// the inflated real error covariance of the public estimate, and the
// infinite-horizon steady states of all three.

#include <vector>

#include "lqgpriv/kalman.hpp"
#include "lqgpriv/model.hpp"

namespace lqgpriv {

/// Deviation covariance sequence: with d_k = xhat_pub_{k|k} - xhat_{k|k},
///   Q^k = (I - K_k C) A Q^{k-1} A' (I - K_k C)' + K_k Sigma_delta K_k',
/// starting from Q^0 = 0. Returns Q^k for k = 0..T.
inline std::vector<Matrix> deviation_recursion(const FilterSolution& gains,
                                               const SystemModel& model,
                                               const PrivacyScheme& scheme,
                                               int T) {
  if (T < 1) throw std::invalid_argument("deviation_recursion: T must be >= 1");
  if (!gains.steady && gains.horizon() < T) {
    throw std::invalid_argument("deviation_recursion: gains cover horizon " +
                                std::to_string(gains.horizon()) +
                                " < T = " + std::to_string(T));
  }
  const Matrix identity = Matrix::Identity(model.n(), model.n());
  std::vector<Matrix> qk(T + 1);
  qk[0] = Matrix::Zero(model.n(), model.n());
  for (int k = 1; k <= T; ++k) {
    const Matrix& gain = gains.K_at(k);
    const Matrix closed = (identity - gain * model.C) * model.A;
    qk[k] = symmetrize(closed * qk[k - 1] * closed.transpose() +
                       gain * scheme.sigma_delta * gain.transpose());
  }
  return qk;
}

/// Lower bound sequence M_k for the deviation covariance:
///   M_0 = 0,  M_1 = K_1 Sigma_delta K_1',  and for k >= 2
///   M-_k = A M_{k-1} A',
///   M_k  = M-_k - M-_k C' (C M-_k C' + Sigma_delta)^{-1} C M-_k,
/// with a pseudo-inverse fallback when the bracketed matrix is singular or
/// ill-conditioned beyond 1e12.
inline std::vector<Matrix> deviation_lower_bound(const SystemModel& model,
                                                 const PrivacyScheme& scheme,
                                                 int T) {
  if (T < 1) throw std::invalid_argument("deviation_lower_bound: T must be >= 1");
  const Matrix k1 = covariance_recursion(model, 1).K_at(1);
  std::vector<Matrix> mk(T + 1);
  mk[0] = Matrix::Zero(model.n(), model.n());
  if (T >= 1) {
    mk[1] = symmetrize(k1 * scheme.sigma_delta * k1.transpose());
  }
  for (int k = 2; k <= T; ++k) {
    const Matrix m_pred = symmetrize(model.A * mk[k - 1] * model.A.transpose());
    const Matrix bracket =
        symmetrize(model.C * m_pred * model.C.transpose() + scheme.sigma_delta);
    const Matrix update = solve_psd(bracket, model.C * m_pred);
    mk[k] = symmetrize(m_pred - m_pred * model.C.transpose() * update);
    if (!mk[k].allFinite()) {
      throw std::runtime_error(
          "deviation_lower_bound: update produced non-finite values at k=" +
          std::to_string(k));
    }
  }
  return mk;
}

/// Real error covariance of the public estimate: P_filt[k] + Q^k, both
/// sequences index-aligned in k.
inline std::vector<Matrix> public_real_covariance(
    const std::vector<Matrix>& p_filt, const std::vector<Matrix>& qk) {
  if (p_filt.size() != qk.size()) {
    throw std::invalid_argument(
        "public_real_covariance: sequence lengths differ, " +
        std::to_string(p_filt.size()) + " vs " + std::to_string(qk.size()));
  }
  std::vector<Matrix> out(p_filt.size());
  for (std::size_t k = 0; k < p_filt.size(); ++k) {
    out[k] = symmetrize(p_filt[k] + qk[k]);
  }
  return out;
}

/// Steady deviation covariance: the unique X with
///   X = F X F' + K Sigma_delta K',  F = (I - K C) A,
/// which the deviation covariance converges to from any start.
inline Matrix steady_deviation(const Matrix& F, const Matrix& K,
                               const PrivacyScheme& scheme) {
  const double rho = spectral_radius(F);
  if (rho >= 1.0) {
    throw std::runtime_error("steady_deviation: unstable filter dynamics, "
                             "spectral radius " + std::to_string(rho));
  }
  const Matrix x = solve_discrete_lyapunov(
      F, symmetrize(K * scheme.sigma_delta * K.transpose()));
  const double residual = max_abs(
      x - F * x * F.transpose() - K * scheme.sigma_delta * K.transpose());
  if (residual > 1e-11 * std::max(1.0, max_abs(x))) {
    throw std::runtime_error("steady_deviation: residual " +
                             std::to_string(residual) + " too large");
  }
  return x;
}

/// Steady lower bound: fixed point of
///   M- = A M A',  M = M- - M- C' (C M- C' + Sigma_delta)^{-1} C M-,
/// iterated from M = K Sigma_delta K' with the steady gain.
inline Matrix steady_lower_bound(const SystemModel& model,
                                 const PrivacyScheme& scheme,
                                 double tol = 1e-12, int max_iter = 100000) {
  const FilterSolution filt = steady_kalman(model);
  const Matrix& gain = filt.K_at(1);
  Matrix m = symmetrize(gain * scheme.sigma_delta * gain.transpose());
  double update = 0.0;
  for (int i = 0; i < max_iter; ++i) {
    const Matrix m_pred = symmetrize(model.A * m * model.A.transpose());
    const Matrix bracket =
        symmetrize(model.C * m_pred * model.C.transpose() + scheme.sigma_delta);
    const Matrix solved = solve_psd(bracket, model.C * m_pred);
    const Matrix next =
        symmetrize(m_pred - m_pred * model.C.transpose() * solved);
    update = max_abs(next - m);
    m = next;
    if (update < tol) return m;
  }
  throw std::runtime_error("steady_lower_bound: no convergence after " +
                           std::to_string(max_iter) +
                           " iterations, last update " + std::to_string(update));
}

/// Everything the per-step analysis emits, assembled over one horizon.
struct DeviationAnalysis {
  std::vector<Matrix> Qk;          // deviation covariance, k = 0..T
  std::vector<Matrix> Mk;          // lower bound, k = 0..T
  std::vector<Matrix> P_pub_real;  // P_filt + Q^k, k = 0..T
  Matrix Q_avg;                    // (1/T) sum of Q^k over k = 0..T-1
};

inline DeviationAnalysis analyze_deviation(const SystemModel& model,
                                           const PrivacyScheme& scheme,
                                           const FilterSolution& filt, int T) {
  DeviationAnalysis analysis;
  analysis.Qk = deviation_recursion(filt, model, scheme, T);
  analysis.Mk = deviation_lower_bound(model, scheme, T);
  std::vector<Matrix> p_filt(T + 1);
  for (int k = 0; k <= T; ++k) p_filt[k] = filt.P_filt_at(k);
  analysis.P_pub_real = public_real_covariance(p_filt, analysis.Qk);
  // The running average deliberately stops at T-1; Q^T is reported but not
  // averaged.
  analysis.Q_avg = Matrix::Zero(model.n(), model.n());
  for (int k = 0; k < T; ++k) analysis.Q_avg += analysis.Qk[k];
  analysis.Q_avg /= static_cast<double>(T);
  return analysis;
}

}  // namespace lqgpriv
