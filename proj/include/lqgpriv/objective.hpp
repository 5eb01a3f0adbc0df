#pragma once

// Closed-form LQG objective values with and without the injection scheme.
// The gap between the two is the privacy term, whose per-step average is the
// control-performance loss metric.

#include "lqgpriv/deviation.hpp"
#include "lqgpriv/kalman.hpp"
#include "lqgpriv/riccati.hpp"

namespace lqgpriv {

struct ObjectiveBreakdown {
  double initial_term = 0.0;        // E x0' S_0 x0 = x0_mean'S_0 x0_mean + tr(S_0 x0_cov)
  double process_noise_term = 0.0;  // sum_k tr(S_{k+1} Q)
  double estimation_term = 0.0;     // sum_k tr(Phi_k P_{k|k})
  double privacy_term = 0.0;        // sum_k tr(Phi_k Q^k)
  double total = 0.0;
  double q_lqg = 0.0;               // privacy_term / T
};

namespace detail {

inline void require_horizon(const LqgSolution& lqg, const FilterSolution& filt,
                            int T, const char* who) {
  if (T < 1) throw std::invalid_argument(std::string(who) + ": T must be >= 1");
  if (!lqg.steady && lqg.horizon() != T) {
    throw std::invalid_argument(std::string(who) + ": LQG solution horizon " +
                                std::to_string(lqg.horizon()) +
                                " != T = " + std::to_string(T));
  }
  if (!filt.steady && filt.horizon() < T) {
    throw std::invalid_argument(std::string(who) + ": filter horizon " +
                                std::to_string(filt.horizon()) +
                                " < T = " + std::to_string(T));
  }
}

}  // namespace detail

/// Objective of the optimally controlled loop without injection:
///   x0_mean'S_0 x0_mean + tr(S_0 x0_cov)
///   + sum_{k=0}^{T-1} tr(S_{k+1} Q) + sum_{k=0}^{T-1} tr(Phi_k P_{k|k}).
inline ObjectiveBreakdown optimal_objective(const SystemModel& model,
                                            const LqgSolution& lqg,
                                            const FilterSolution& filt, int T) {
  detail::require_horizon(lqg, filt, T, "optimal_objective");
  ObjectiveBreakdown out;
  const Matrix& s0 = lqg.S_at(0);
  out.initial_term = model.x0_mean.dot(s0 * model.x0_mean) +
                     (s0 * model.x0_cov).trace();
  for (int k = 0; k < T; ++k) {
    out.process_noise_term += (lqg.S_at(k + 1) * model.Q).trace();
    out.estimation_term += (lqg.Phi_at(k) * filt.P_filt_at(k)).trace();
  }
  out.total = out.initial_term + out.process_noise_term + out.estimation_term;
  return out;
}

/// Objective under the injection scheme: the optimal value plus
/// sum_{k=0}^{T-1} tr(Phi_k Q^k), with q_lqg the per-step loss.
inline ObjectiveBreakdown objective_with_privacy(const SystemModel& model,
                                                 const LqgSolution& lqg,
                                                 const FilterSolution& filt,
                                                 const DeviationAnalysis& deviation,
                                                 int T) {
  detail::require_horizon(lqg, filt, T, "objective_with_privacy");
  if (static_cast<int>(deviation.Qk.size()) < T) {
    throw std::invalid_argument(
        "objective_with_privacy: deviation sequence shorter than T");
  }
  ObjectiveBreakdown out = optimal_objective(model, lqg, filt, T);
  for (int k = 0; k < T; ++k) {
    out.privacy_term += (lqg.Phi_at(k) * deviation.Qk[k]).trace();
  }
  out.total += out.privacy_term;
  out.q_lqg = out.privacy_term / static_cast<double>(T);
  return out;
}

/// Steady per-step loss tr(Phi * Q_privacy).
inline double steady_lqg_loss(const Matrix& phi, const Matrix& q_privacy) {
  return (phi * q_privacy).trace();
}

}  // namespace lqgpriv
