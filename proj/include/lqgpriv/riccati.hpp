#pragma once

// Backward LQG value recursion and its steady state. Produces the cost-to-go
// matrices S_k, the feedback gains L_k the server applies, and the loss
// weights Phi_k that price estimate deviations in the objective.

#include <cstddef>
#include <vector>

#include "lqgpriv/model.hpp"

namespace lqgpriv {

struct LqgSolution {
  // Finite horizon T: S has T+1 entries (S[k], k = 0..T), L and Phi have T
  // entries (k = 0..T-1). Steady solutions hold a single entry each.
  std::vector<Matrix> S;
  std::vector<Matrix> L;
  std::vector<Matrix> Phi;
  bool steady = false;

  int horizon() const { return static_cast<int>(S.size()) - 1; }

  const Matrix& S_at(int k) const { return steady ? S[0] : S.at(k); }
  const Matrix& L_at(int k) const { return steady ? L[0] : L.at(k); }
  const Matrix& Phi_at(int k) const { return steady ? Phi[0] : Phi.at(k); }
};

namespace detail {

struct RiccatiStep {
  Matrix S;
  Matrix L;
  Matrix Phi;
};

// One backward step from S_{k+1}: S, L and Phi at k.
//   S_k   = A'S+A + W - A'S+B (B'S+B + U)^{-1} B'S+A
//   L_k   = -(B'S+B + U)^{-1} B'S+A
//   Phi_k =  A'S+B (B'S+B + U)^{-1} B'S+A
inline RiccatiStep riccati_step(const Matrix& s_next, const SystemModel& model,
                                const LqgWeights& weights, int k) {
  const Matrix input_block =
      symmetrize(model.B.transpose() * s_next * model.B + weights.U);
  Eigen::LLT<Matrix> llt(input_block);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(
        "riccati: B'S B + U is not positive definite at k=" +
        std::to_string(k));
  }
  const Matrix cross = model.B.transpose() * s_next * model.A;  // B'S+A
  RiccatiStep step;
  step.L = -llt.solve(cross);
  step.Phi = symmetrize(-cross.transpose() * step.L);
  step.S = symmetrize(model.A.transpose() * s_next * model.A + weights.W -
                      step.Phi);
  return step;
}

}  // namespace detail

/// Backward value recursion over k = T-1..0 with terminal S_T = W.
inline LqgSolution backward_riccati(const SystemModel& model,
                                    const LqgWeights& weights, int T) {
  if (T < 1) throw std::invalid_argument("backward_riccati: T must be >= 1");
  LqgSolution sol;
  sol.S.resize(T + 1);
  sol.L.resize(T);
  sol.Phi.resize(T);
  sol.S[T] = weights.W;
  for (int k = T - 1; k >= 0; --k) {
    auto step = detail::riccati_step(sol.S[k + 1], model, weights, k);
    sol.S[k] = std::move(step.S);
    sol.L[k] = std::move(step.L);
    sol.Phi[k] = std::move(step.Phi);
  }
  return sol;
}

/// Steady solution: iterates the backward recursion from S = W until the
/// max-abs update falls below tol. The returned S is the fixed point of
/// S = A'SA + W - A'SB (U + B'SB)^{-1} B'SA, with L and Phi evaluated at it.
inline LqgSolution steady_lqg(const SystemModel& model,
                              const LqgWeights& weights, double tol = 1e-12,
                              int max_iter = 100000) {
  Matrix s = symmetrize(weights.W);
  double update = 0.0;
  for (int i = 0; i < max_iter; ++i) {
    auto step = detail::riccati_step(s, model, weights, -1);
    update = max_abs(step.S - s);
    s = std::move(step.S);
    if (update < tol) {
      auto at_fixed_point = detail::riccati_step(s, model, weights, -1);
      LqgSolution sol;
      sol.S = {s};
      sol.L = {std::move(at_fixed_point.L)};
      sol.Phi = {std::move(at_fixed_point.Phi)};
      sol.steady = true;
      return sol;
    }
  }
  throw std::runtime_error("steady_lqg: no convergence after " +
                           std::to_string(max_iter) +
                           " iterations, last update " + std::to_string(update));
}

}  // namespace lqgpriv
