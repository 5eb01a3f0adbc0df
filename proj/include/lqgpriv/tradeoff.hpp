#pragma once

// Privacy-vs-performance trade-off: maximize tr(Q_privacy) subject to a cap
// on the control-performance loss, over PSD injection covariances.
//
// Both tr(Q_privacy) and the loss are linear in Sigma_delta, so each has a
// PSD adjoint matrix: tr(Q_privacy) = tr(G Sigma), loss = tr(H Sigma). The
// feasible set is the PSD cone cut by one half-space, hence a rank-one
// extreme point attains the optimum and the problem reduces to a generalized
// Rayleigh-quotient maximization of G against H on the range of H. Kernel
// directions of H that still produce deviation make the problem unbounded.

#include <cmath>
#include <optional>
#include <vector>

#include "lqgpriv/kalman.hpp"
#include "lqgpriv/model.hpp"
#include "lqgpriv/riccati.hpp"

namespace lqgpriv {

/// Adjoint matrices of the two linear maps Sigma_delta -> scalar.
struct LinearMaps {
  Matrix G;  // p x p PSD, tr(Q_privacy) = tr(G Sigma)
  Matrix H;  // p x p PSD, loss = tr(H Sigma)
  bool infinite_horizon = false;
};

struct TradeoffResult {
  Matrix sigma_delta_star;  // rank <= 1 PSD optimum (zero when alpha = 0)
  double tr_privacy_star = 0.0;
  double q_lqg_achieved = 0.0;
  bool bounded = true;
  std::optional<Vector> unbounded_direction;  // set iff !bounded
};

namespace detail {

// Deterministic sign convention: first component above threshold positive.
inline void normalize_sign(Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-14) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace detail

/// Finite-horizon adjoints. Unrolling the deviation recursion gives
///   Q^k = sum_{j=1}^{k} F_{k,j} K_j Sigma K_j' F_{k,j}',
///   F_{k,j} = prod_{i=j+1}^{k} (I - K_i C) A,
/// so with the backward accumulators
///   W_j = I + E_j' W_{j+1} E_j,   V_j = Phi_j + E_j' V_{j+1} E_j,
///   E_j = (I - K_{j+1} C) A,
/// G = (1/T) sum_j K_j' W_j K_j and H = (1/T) sum_j K_j' V_j K_j.
inline LinearMaps build_maps_finite(const SystemModel& model,
                                    const LqgSolution& lqg,
                                    const FilterSolution& filt, int T) {
  if (T < 1) throw std::invalid_argument("build_maps_finite: T must be >= 1");
  const Eigen::Index n = model.n();
  const Eigen::Index p = model.p();
  const Matrix identity = Matrix::Identity(n, n);
  Matrix g = Matrix::Zero(p, p);
  Matrix h = Matrix::Zero(p, p);
  if (T >= 2) {
    Matrix wj = identity;          // j = T-1
    Matrix vj = lqg.Phi_at(T - 1);
    for (int j = T - 1; j >= 1; --j) {
      if (j < T - 1) {
        const Matrix e = (identity - filt.K_at(j + 1) * model.C) * model.A;
        wj = symmetrize(identity + e.transpose() * wj * e);
        vj = symmetrize(lqg.Phi_at(j) + e.transpose() * vj * e);
      }
      const Matrix& gain = filt.K_at(j);
      g += gain.transpose() * wj * gain;
      h += gain.transpose() * vj * gain;
    }
    g /= static_cast<double>(T);
    h /= static_cast<double>(T);
  }
  return {symmetrize(g), symmetrize(h), false};
}

/// Infinite-horizon adjoints from the steady quantities:
///   G = K' Z K with Z = F'ZF + I,   H = K' Y K with Y = F'YF + Phi.
inline LinearMaps build_maps_infinite(const Matrix& F, const Matrix& K,
                                      const Matrix& Phi) {
  if (spectral_radius(F) >= 1.0) {
    throw std::runtime_error("build_maps_infinite: unstable filter dynamics");
  }
  const Matrix identity = Matrix::Identity(F.rows(), F.cols());
  const Matrix z = solve_discrete_lyapunov(F.transpose(), identity);
  const Matrix y = solve_discrete_lyapunov(F.transpose(), symmetrize(Phi));
  return {symmetrize(K.transpose() * z * K),
          symmetrize(K.transpose() * y * K), true};
}

/// Solves max tr(G Sigma) s.t. tr(H Sigma) <= alpha, Sigma PSD.
///
/// A direction v with v'Hv ~ 0 but v'Gv > 0 makes the problem unbounded
/// (multiples of vv' add deviation at zero cost); otherwise the optimum is
/// Sigma* = alpha v v' where v maximizes v'Gv / v'Hv over the range of H,
/// scaled so the constraint is tight, and tr(G Sigma*) = alpha lambda_max.
inline TradeoffResult solve_tradeoff(const LinearMaps& maps, double alpha) {
  if (alpha < 0.0) {
    throw std::invalid_argument("solve_tradeoff: alpha must be >= 0");
  }
  const Eigen::Index p = maps.G.rows();
  if (maps.H.rows() != p || maps.G.cols() != p || maps.H.cols() != p) {
    throw std::invalid_argument("solve_tradeoff: G and H must be p x p");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es_h(maps.H);
  const Vector& ev = es_h.eigenvalues();  // ascending
  const double kernel_tol = 1e-12 * maps.H.trace();
  const double gain_tol = 1e-10 * maps.G.trace();

  // Kernel screening: zero-cost directions that still buy privacy.
  for (Eigen::Index i = 0; i < p; ++i) {
    if (ev(i) > kernel_tol) continue;
    Vector v = es_h.eigenvectors().col(i);
    if (v.dot(maps.G * v) > gain_tol) {
      detail::normalize_sign(v);
      TradeoffResult res;
      res.bounded = false;
      res.unbounded_direction = v;
      res.sigma_delta_star = Matrix::Zero(p, p);
      return res;
    }
  }

  TradeoffResult res;
  res.sigma_delta_star = Matrix::Zero(p, p);
  if (alpha == 0.0) return res;

  std::vector<Eigen::Index> range;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (ev(i) > kernel_tol) range.push_back(i);
  }
  if (range.empty()) return res;  // H = 0 and no profitable direction

  // Whitened restriction of G to range(H): Gt = D^{-1/2} Vr' G Vr D^{-1/2}.
  const Eigen::Index r = static_cast<Eigen::Index>(range.size());
  Matrix vr(p, r);
  Vector inv_sqrt(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    vr.col(j) = es_h.eigenvectors().col(range[j]);
    inv_sqrt(j) = 1.0 / std::sqrt(ev(range[j]));
  }
  const Matrix gt = symmetrize(inv_sqrt.asDiagonal() * vr.transpose() *
                               maps.G * vr * inv_sqrt.asDiagonal());
  Eigen::SelfAdjointEigenSolver<Matrix> es_g(gt);
  const Vector& gev = es_g.eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < r; ++i) {
    if (gev(i) > gev(best)) best = i;
  }
  const double lambda_max = std::max(gev(best), 0.0);

  Vector v = vr * (inv_sqrt.asDiagonal() * es_g.eigenvectors().col(best));
  detail::normalize_sign(v);  // v'Hv = 1 by construction
  res.sigma_delta_star = symmetrize(alpha * v * v.transpose());
  res.tr_privacy_star = alpha * lambda_max;
  res.q_lqg_achieved = (maps.H * res.sigma_delta_star).trace();
  return res;
}

/// Closed form for scalar systems (n = m = p = 1):
///   Sigma* = alpha / (Phi K^2) * (1 - A^2 (1 - K C)^2),  Q* = alpha / Phi.
inline TradeoffResult scalar_closed_form(const SystemModel& model,
                                         const LqgSolution& steady_lqg_sol,
                                         const FilterSolution& steady_filt,
                                         double alpha) {
  if (model.n() != 1 || model.m() != 1 || model.p() != 1) {
    throw std::invalid_argument("scalar_closed_form: model must be scalar");
  }
  if (alpha < 0.0) {
    throw std::invalid_argument("scalar_closed_form: alpha must be >= 0");
  }
  const double a = model.A(0, 0);
  const double c = model.C(0, 0);
  const double gain = steady_filt.K_at(1)(0, 0);
  const double phi = steady_lqg_sol.Phi_at(0)(0, 0);
  const double shrink = 1.0 - a * a * (1.0 - gain * c) * (1.0 - gain * c);
  TradeoffResult res;
  res.sigma_delta_star = Matrix::Constant(1, 1, alpha / (phi * gain * gain) * shrink);
  res.tr_privacy_star = alpha / phi;
  res.q_lqg_achieved = alpha;
  return res;
}

}  // namespace lqgpriv
