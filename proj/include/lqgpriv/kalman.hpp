#pragma once

// Forward Kalman covariance/gain recursion, its steady state, and the
// single-step estimate update. The covariance recursion never looks at data,
// so one recursion serves both the true filter (fed y_k) and the public
// filter (fed z_k): their gains and reported covariances coincide.

#include <limits>
#include <vector>

#include "lqgpriv/model.hpp"

namespace lqgpriv {

struct FilterSolution {
  // Finite horizon T: P_filt has T+1 entries (P_{k|k}, k = 0..T, with
  // P_filt[0] = x0_cov); P_pred and K are index-aligned with entries valid
  // for k = 1..T (index 0 holds an empty matrix). Steady solutions hold a
  // single entry each and additionally F = (I - K C) A.
  std::vector<Matrix> P_pred;
  std::vector<Matrix> P_filt;
  std::vector<Matrix> K;
  Matrix F;
  bool steady = false;

  int horizon() const { return static_cast<int>(P_filt.size()) - 1; }

  const Matrix& P_pred_at(int k) const {
    if (steady) return P_pred[0];
    if (k < 1) throw std::out_of_range("P_pred_at: k must be >= 1");
    return P_pred.at(k);
  }
  const Matrix& P_filt_at(int k) const {
    return steady ? P_filt[0] : P_filt.at(k);
  }
  const Matrix& K_at(int k) const {
    if (steady) return K[0];
    if (k < 1) throw std::out_of_range("K_at: k must be >= 1");
    return K.at(k);
  }
};

/// Filtered estimate snapshot at time k.
struct FilterState {
  Vector xhat;
  int k = 0;
};

namespace detail {

struct KalmanStep {
  Matrix P_pred;
  Matrix K;
  Matrix P_filt;
};

// One step: P_pred = A P A' + Q, K = P_pred C'(C P_pred C' + R)^{-1},
// P_filt = (I - K C) P_pred. The innovation covariance is inverted through
// its Cholesky factorization (R > 0 keeps it positive definite).
inline KalmanStep kalman_step(const Matrix& p_filt_prev,
                              const SystemModel& model, int k) {
  KalmanStep step;
  step.P_pred =
      symmetrize(model.A * p_filt_prev * model.A.transpose() + model.Q);
  const Matrix innovation_cov =
      symmetrize(model.C * step.P_pred * model.C.transpose() + model.R);
  Eigen::LLT<Matrix> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(
        "kalman: innovation covariance not positive definite at k=" +
        std::to_string(k));
  }
  step.K = llt.solve(model.C * step.P_pred).transpose();
  const Matrix identity = Matrix::Identity(model.n(), model.n());
  step.P_filt = symmetrize((identity - step.K * model.C) * step.P_pred);
  return step;
}

}  // namespace detail

/// Covariance/gain sequences for k = 1..T starting from P_{0|0} = x0_cov.
inline FilterSolution covariance_recursion(const SystemModel& model, int T) {
  if (T < 1) throw std::invalid_argument("covariance_recursion: T must be >= 1");
  FilterSolution sol;
  sol.P_pred.resize(T + 1);
  sol.P_filt.resize(T + 1);
  sol.K.resize(T + 1);
  sol.P_filt[0] = symmetrize(model.x0_cov);
  for (int k = 1; k <= T; ++k) {
    auto step = detail::kalman_step(sol.P_filt[k - 1], model, k);
    sol.P_pred[k] = std::move(step.P_pred);
    sol.K[k] = std::move(step.K);
    sol.P_filt[k] = std::move(step.P_filt);
  }
  return sol;
}

/// Steady filter: fixed point of the covariance recursion, iterated from
/// P = x0_cov (or Q when x0_cov = 0) until the max-abs update of the
/// predicted covariance falls below tol. F = (I - K C) A is returned and
/// verified stable.
inline FilterSolution steady_kalman(const SystemModel& model,
                                    double tol = 1e-12,
                                    int max_iter = 100000) {
  Matrix p_filt =
      max_abs(model.x0_cov) > 0.0 ? symmetrize(model.x0_cov) : symmetrize(model.Q);
  Matrix p_pred_prev;
  double update = 0.0;
  for (int i = 0; i < max_iter; ++i) {
    auto step = detail::kalman_step(p_filt, model, -1);
    update = p_pred_prev.size() == 0
                 ? std::numeric_limits<double>::infinity()
                 : max_abs(step.P_pred - p_pred_prev);
    p_pred_prev = step.P_pred;
    p_filt = step.P_filt;
    if (update < tol) {
      FilterSolution sol;
      sol.P_pred = {std::move(step.P_pred)};
      sol.K = {std::move(step.K)};
      sol.P_filt = {std::move(step.P_filt)};
      sol.steady = true;
      sol.F = (Matrix::Identity(model.n(), model.n()) - sol.K[0] * model.C) *
              model.A;
      const double rho = spectral_radius(sol.F);
      if (rho >= 1.0) {
        throw std::runtime_error(
            "steady_kalman: converged filter is not stabilizing, "
            "spectral radius " + std::to_string(rho));
      }
      return sol;
    }
  }
  throw std::runtime_error("steady_kalman: no convergence after " +
                           std::to_string(max_iter) +
                           " iterations, last update " + std::to_string(update));
}

/// Time update followed by measurement update of the estimate:
///   xpred = A xhat + B u_prev,  xnew = xpred + gain (obs - C xpred).
/// Used identically for the true filter (observation y_k) and the public
/// filter (observation z_k).
inline FilterState filter_step(const FilterState& state, const Matrix& gain,
                               const SystemModel& model, const Vector& u_prev,
                               const Vector& observation) {
  const Vector xpred = model.A * state.xhat + model.B * u_prev;
  return {xpred + gain * (observation - model.C * xpred), state.k + 1};
}

}  // namespace lqgpriv
