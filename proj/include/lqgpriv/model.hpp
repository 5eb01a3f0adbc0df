#pragma once

// Problem data for the cooperative LQG control loop: plant/sensor model,
// quadratic-cost weights, horizon, and the injected-noise scheme, plus the
// feasibility validation every downstream computation relies on.

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "lqgpriv/linalg.hpp"

namespace lqgpriv {

/// x_{k+1} = A x_k + B u_k + w_k,   y_k = C x_k + v_k,
/// w_k ~ N(0, Q), v_k ~ N(0, R), x_0 ~ N(x0_mean, x0_cov).
struct SystemModel {
  Matrix A;        // n x n state transition
  Matrix B;        // n x m input map
  Matrix C;        // p x n observation map
  Matrix Q;        // n x n process-noise covariance, PSD
  Matrix R;        // p x p measurement-noise covariance, PD
  Vector x0_mean;  // n
  Matrix x0_cov;   // n x n, PSD

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }
};

/// Stage cost x'Wx + u'Uu with terminal x_T'Wx_T. W PSD, U PD.
struct LqgWeights {
  Matrix W;  // n x n
  Matrix U;  // m x m
};

/// Covariance of the noise injected into transmitted measurements. PSD.
struct PrivacyScheme {
  Matrix sigma_delta;  // p x p
};

/// Finite horizon T >= 1, or the infinite (steady-state) marker.
class Horizon {
 public:
  static Horizon finite(int t) {
    if (t < 1) {
      throw std::invalid_argument("Horizon: finite T must be >= 1, got " +
                                  std::to_string(t));
    }
    Horizon h;
    h.t_ = t;
    return h;
  }
  static Horizon infinite() { return Horizon{}; }

  bool is_infinite() const { return t_ < 0; }
  int T() const {
    if (is_infinite()) throw std::logic_error("Horizon: infinite has no T");
    return t_;
  }

 private:
  int t_ = -1;
};

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;  // check-specific quantity (eigenvalue, rank, ...)
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const ValidationCheck& c) { return c.passed; });
  }

  const ValidationCheck* find(std::string_view name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

namespace detail {

inline void require_dims(bool ok, const std::string& field,
                         const std::string& expected) {
  if (!ok) {
    throw std::invalid_argument(field + ": expected " + expected);
  }
}

inline ValidationCheck symmetry_check(const std::string& name, const Matrix& x,
                                      double tol = 1e-10) {
  const double asym = max_abs(x - symmetrize(x));
  return {name + " symmetric", asym <= tol, asym,
          asym <= tol ? "" : name + " deviates from its symmetrization"};
}

inline ValidationCheck psd_check(const std::string& name, const Matrix& x,
                                 double tol = 1e-10) {
  const double lambda_min = min_symmetric_eigenvalue(x);
  return {name + " positive semidefinite", lambda_min >= -tol, lambda_min,
          lambda_min >= -tol ? "" : name + " must be positive semidefinite"};
}

inline ValidationCheck pd_check(const std::string& name, const Matrix& x) {
  const double lambda_min = min_symmetric_eigenvalue(x);
  return {name + " positive definite", lambda_min > 0.0, lambda_min,
          lambda_min > 0.0 ? "" : name + " must be positive definite"};
}

// Rank of [B, AB, ..., A^{n-1}B].
inline Eigen::Index krylov_rank(const Matrix& a, const Matrix& b,
                                double rel_tol = 1e-8) {
  const Eigen::Index n = a.rows();
  Matrix blocks(n, n * b.cols());
  Matrix power = b;
  for (Eigen::Index i = 0; i < n; ++i) {
    blocks.middleCols(i * b.cols(), b.cols()) = power;
    power = a * power;
  }
  return numerical_rank(blocks, rel_tol);
}

// Worst-case relative smallest singular value of [A - lambda I; C] over
// eigenvalues of A on or outside the unit circle (1.0 when A is stable).
// For stabilizability pass (A', B') and use that ranks survive transposition.
inline double unstable_mode_margin(const Matrix& a, const Matrix& c) {
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<Matrix> es(a);
  double worst = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    if (std::abs(lambda) < 1.0 - 1e-9) continue;
    Eigen::MatrixXcd stacked(n + c.rows(), n);
    stacked.topRows(n) =
        a.cast<std::complex<double>>() -
        lambda * Eigen::MatrixXcd::Identity(n, n);
    stacked.bottomRows(c.rows()) = c.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked);
    const auto& sv = svd.singularValues();
    const double ratio = sv(0) > 0.0 ? sv(sv.size() - 1) / sv(0) : 0.0;
    worst = std::min(worst, ratio);
  }
  return worst;
}

}  // namespace detail

/// Dimension consistency; throws std::invalid_argument naming the offending
/// field. Separate from validate_model so parsers can call it early.
inline void check_dimensions(const SystemModel& model,
                             const LqgWeights& weights) {
  using detail::require_dims;
  const Eigen::Index n = model.A.rows();
  require_dims(model.A.cols() == n, "A", "a square n x n matrix");
  require_dims(n >= 1, "A", "at least one state");
  require_dims(model.B.rows() == n, "B", std::to_string(n) + " rows");
  require_dims(model.B.cols() >= 1, "B", "at least one input column");
  require_dims(model.C.cols() == n, "C", std::to_string(n) + " columns");
  require_dims(model.C.rows() >= 1, "C", "at least one output row");
  require_dims(model.Q.rows() == n && model.Q.cols() == n, "Q",
               std::to_string(n) + " x " + std::to_string(n));
  const Eigen::Index p = model.C.rows();
  require_dims(model.R.rows() == p && model.R.cols() == p, "R",
               std::to_string(p) + " x " + std::to_string(p));
  require_dims(model.x0_mean.size() == n, "x0_mean",
               std::to_string(n) + " entries");
  require_dims(model.x0_cov.rows() == n && model.x0_cov.cols() == n, "x0_cov",
               std::to_string(n) + " x " + std::to_string(n));
  require_dims(weights.W.rows() == n && weights.W.cols() == n, "W",
               std::to_string(n) + " x " + std::to_string(n));
  const Eigen::Index m = model.B.cols();
  require_dims(weights.U.rows() == m && weights.U.cols() == m, "U",
               std::to_string(m) + " x " + std::to_string(m));
}

/// Deterministic, side-effect-free feasibility report: symmetry/PSD/PD of
/// the covariances and weights, (A,B) controllability, (C,A) detectability,
/// and (A, sqrt(Q)) stabilizability. Overall pass iff every check passes.
///
/// Controllability uses the rank of the stacked Krylov blocks; detectability
/// and stabilizability test the rank of [A - lambda I; C] (resp. its input
/// analogue) at every eigenvalue of A on or outside the unit circle. All rank
/// decisions use the 1e-8 * sigma_max singular-value threshold.
inline ValidationReport validate_model(const SystemModel& model,
                                       const LqgWeights& weights) {
  check_dimensions(model, weights);
  constexpr double kRankTol = 1e-8;

  ValidationReport report;
  auto& checks = report.checks;
  checks.push_back(detail::symmetry_check("Q", model.Q));
  checks.push_back(detail::psd_check("Q", model.Q));
  checks.push_back(detail::symmetry_check("x0_cov", model.x0_cov));
  checks.push_back(detail::psd_check("x0_cov", model.x0_cov));
  checks.push_back(detail::symmetry_check("R", model.R));
  checks.push_back(detail::pd_check("R", model.R));
  checks.push_back(detail::symmetry_check("W", weights.W));
  checks.push_back(detail::psd_check("W", weights.W));
  checks.push_back(detail::symmetry_check("U", weights.U));
  checks.push_back(detail::pd_check("U", weights.U));

  const Eigen::Index n = model.n();
  const Eigen::Index ctrb_rank = detail::krylov_rank(model.A, model.B, kRankTol);
  checks.push_back({"(A,B) controllable", ctrb_rank == n,
                    static_cast<double>(ctrb_rank),
                    ctrb_rank == n ? "" : "controllability matrix rank deficient"});

  const double detect = detail::unstable_mode_margin(model.A, model.C);
  checks.push_back({"(C,A) detectable", detect > kRankTol, detect,
                    detect > kRankTol ? "" : "unstable mode unobservable"});

  const Matrix sqrt_q = psd_sqrt(model.Q);
  const double stab = detail::unstable_mode_margin(
      model.A.transpose(), sqrt_q.transpose());
  checks.push_back({"(A,sqrtQ) stabilizable", stab > kRankTol, stab,
                    stab > kRankTol ? "" : "unstable mode unreachable from process noise"});

  return report;
}

}  // namespace lqgpriv
