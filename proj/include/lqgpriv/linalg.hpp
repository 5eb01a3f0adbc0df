#pragma once

// Dense linear-algebra helpers shared across the library: symmetrization,
// PSD factorizations, numerical rank, and the discrete Lyapunov solver.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace lqgpriv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// (X + X')/2. Idempotent; throws if X is not square.
inline Matrix symmetrize(const Matrix& x) {
  if (x.rows() != x.cols()) {
    throw std::invalid_argument("symmetrize: matrix must be square, got " +
                                std::to_string(x.rows()) + "x" +
                                std::to_string(x.cols()));
  }
  return 0.5 * (x + x.transpose());
}

inline double max_abs(const Matrix& x) {
  return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
}

inline double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of the symmetrized matrix.
inline double min_symmetric_eigenvalue(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(x), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Rank with singular values below rel_tol * sigma_max counted as zero.
inline Eigen::Index numerical_rank(const Matrix& x, double rel_tol = 1e-8) {
  if (x.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(x);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double thresh = rel_tol * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) ++rank;
  }
  return rank;
}

/// Symmetric PSD square root. Negative eigenvalues (rounding noise) are
/// clamped to zero, so rank-deficient covariances are supported.
inline Matrix psd_sqrt(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(x));
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("psd_sqrt: eigendecomposition failed");
  }
  const Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

/// Solves S * X = B for symmetric PSD S. Falls back to the Moore-Penrose
/// pseudo-inverse when cond(S) exceeds cond_limit or S is singular.
inline Matrix solve_psd(const Matrix& s, const Matrix& b,
                        double cond_limit = 1e12) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s));
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("solve_psd: eigendecomposition failed");
  }
  const Vector& ev = es.eigenvalues();
  const double lambda_max = ev.maxCoeff();
  if (lambda_max <= 0.0) return Matrix::Zero(s.rows(), b.cols());
  const double thresh = lambda_max / cond_limit;
  Vector inv = Vector::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > thresh) inv(i) = 1.0 / ev(i);
  }
  return es.eigenvectors() * inv.asDiagonal() *
         es.eigenvectors().transpose() * b;
}

/// Unique solution of X = F X F' + G for spectral_radius(F) < 1. Squared
/// accumulation: X_{j+1} = X_j + F_j X_j F_j', F_{j+1} = F_j^2, which sums
/// the series in O(log) matrix products.
inline Matrix solve_discrete_lyapunov(const Matrix& f, const Matrix& g,
                                      double tol = 1e-13, int max_iter = 200) {
  const double rho = spectral_radius(f);
  if (rho >= 1.0) {
    throw std::runtime_error("solve_discrete_lyapunov: spectral radius " +
                             std::to_string(rho) + " >= 1, no unique solution");
  }
  Matrix x = symmetrize(g);
  Matrix fk = f;
  for (int i = 0; i < max_iter; ++i) {
    const Matrix xn = symmetrize(x + fk * x * fk.transpose());
    const double update = max_abs(xn - x);
    x = xn;
    if (update < tol) return x;
    fk = fk * fk;
  }
  throw std::runtime_error("solve_discrete_lyapunov: no convergence");
}

}  // namespace lqgpriv
