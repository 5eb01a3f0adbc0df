#pragma once

// Seeded Monte Carlo simulation of the closed loop: plant, sensor, injected
// noise, public/true/server filters, and the applied control, advanced in
// lockstep on one noise realization. Aggregation reproduces the deviation
// covariance and objective formulas empirically.
//
// Reproducibility contract: child seeds are derived from (master seed, run
// index) through mix_seed, and each run splits its own seed into a
// plant/sensor stream and an injection stream. Runs that differ only in the
// injected sequence therefore see identical w, v and x_0 draws.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "lqgpriv/deviation.hpp"
#include "lqgpriv/kalman.hpp"
#include "lqgpriv/model.hpp"
#include "lqgpriv/objective.hpp"
#include "lqgpriv/perfect_privacy.hpp"
#include "lqgpriv/random.hpp"
#include "lqgpriv/riccati.hpp"

namespace lqgpriv {

enum class ServerMode { Honest, Doubtful };

struct TrajectoryLog {
  // x, xhat, xhat_pub (and xhat_svr in doubtful mode) are indexed k = 0..T;
  // y, delta, z hold entries for k = 1..T (index 0 empty); u for k = 0..T-1.
  // The applied control is u_k = L_k xhat_pub_k in honest mode and
  // u_k = L_k xhat_svr_k in doubtful mode.
  std::vector<Vector> x;
  std::vector<Vector> y;
  std::vector<Vector> delta;
  std::vector<Vector> z;
  std::vector<Vector> u;
  std::vector<Vector> xhat;
  std::vector<Vector> xhat_pub;
  std::vector<Vector> xhat_svr;
  std::uint64_t seed = 0;
  ServerMode server_mode = ServerMode::Honest;

  int horizon() const { return static_cast<int>(u.size()); }
};

/// Gains shared by every run of one experiment. The doubtful server refilters
/// with measurement covariance R + Sigma_delta.
struct ClosedLoopGains {
  LqgSolution lqg;
  FilterSolution filt;
  std::optional<FilterSolution> server_filt;
};

inline ClosedLoopGains make_closed_loop_gains(const SystemModel& model,
                                              const LqgWeights& weights,
                                              const PrivacyScheme& scheme,
                                              int T, ServerMode mode) {
  ClosedLoopGains gains{backward_riccati(model, weights, T),
                        covariance_recursion(model, T), std::nullopt};
  if (mode == ServerMode::Doubtful) {
    SystemModel doubted = model;
    doubted.R = symmetrize(model.R + scheme.sigma_delta);
    gains.server_filt = covariance_recursion(doubted, T);
  }
  return gains;
}

/// One closed-loop run on one noise realization. The true filter consumes
/// y_k, the public filter consumes z_k = y_k + delta_k; both are fed the
/// control actually applied. delta_override replaces the Gaussian injection
/// with the plan's deterministic sequence.
inline TrajectoryLog run_closed_loop(const SystemModel& model,
                                     const PrivacyScheme& scheme, int T,
                                     std::uint64_t seed, ServerMode mode,
                                     const ClosedLoopGains& gains,
                                     const PerfectPrivacyPlan* delta_override =
                                         nullptr) {
  std::mt19937_64 noise_rng(mix_seed(seed, 1));
  std::mt19937_64 inject_rng(mix_seed(seed, 2));
  GaussianSampler init_sampler(model.x0_cov);
  GaussianSampler process_sampler(model.Q);
  GaussianSampler meas_sampler(model.R);
  GaussianSampler inject_sampler(scheme.sigma_delta);

  const bool doubtful = mode == ServerMode::Doubtful;
  if (doubtful && !gains.server_filt) {
    throw std::invalid_argument("run_closed_loop: doubtful mode needs server gains");
  }

  TrajectoryLog log;
  log.seed = seed;
  log.server_mode = mode;
  log.x.resize(T + 1);
  log.y.resize(T + 1);
  log.delta.resize(T + 1);
  log.z.resize(T + 1);
  log.u.resize(T);
  log.xhat.resize(T + 1);
  log.xhat_pub.resize(T + 1);
  if (doubtful) log.xhat_svr.resize(T + 1);

  log.x[0] = model.x0_mean + init_sampler.sample(noise_rng);
  log.xhat[0] = model.x0_mean;
  log.xhat_pub[0] = model.x0_mean;
  if (doubtful) log.xhat_svr[0] = model.x0_mean;

  for (int k = 0; k < T; ++k) {
    const Vector& controller_state =
        doubtful ? log.xhat_svr[k] : log.xhat_pub[k];
    log.u[k] = gains.lqg.L_at(k) * controller_state;
    log.x[k + 1] =
        model.A * log.x[k] + model.B * log.u[k] + process_sampler.sample(noise_rng);
    log.y[k + 1] = model.C * log.x[k + 1] + meas_sampler.sample(noise_rng);
    log.delta[k + 1] = delta_override ? delta_override->delta_seq.at(k + 1)
                                      : inject_sampler.sample(inject_rng);
    log.z[k + 1] = log.y[k + 1] + log.delta[k + 1];

    const FilterState prev{log.xhat[k], k};
    log.xhat[k + 1] =
        filter_step(prev, gains.filt.K_at(k + 1), model, log.u[k], log.y[k + 1])
            .xhat;
    const FilterState prev_pub{log.xhat_pub[k], k};
    log.xhat_pub[k + 1] =
        filter_step(prev_pub, gains.filt.K_at(k + 1), model, log.u[k],
                    log.z[k + 1])
            .xhat;
    if (doubtful) {
      const FilterState prev_svr{log.xhat_svr[k], k};
      log.xhat_svr[k + 1] =
          filter_step(prev_svr, gains.server_filt->K_at(k + 1), model,
                      log.u[k], log.z[k + 1])
              .xhat;
    }
  }
  return log;
}

/// Convenience wrapper that computes the gains itself.
inline TrajectoryLog run_closed_loop(const SystemModel& model,
                                     const LqgWeights& weights,
                                     const PrivacyScheme& scheme, int T,
                                     std::uint64_t seed, ServerMode mode,
                                     const PerfectPrivacyPlan* delta_override =
                                         nullptr) {
  const ClosedLoopGains gains =
      make_closed_loop_gains(model, weights, scheme, T, mode);
  return run_closed_loop(model, scheme, T, seed, mode, gains, delta_override);
}

/// Realized cost sum_{k=0}^{T-1} (x_k'W x_k + u_k'U u_k) + x_T'W x_T.
inline double realized_objective(const TrajectoryLog& log,
                                 const LqgWeights& weights) {
  const int T = log.horizon();
  double value = 0.0;
  for (int k = 0; k < T; ++k) {
    value += log.x[k].dot(weights.W * log.x[k]) +
             log.u[k].dot(weights.U * log.u[k]);
  }
  value += log.x[T].dot(weights.W * log.x[T]);
  return value;
}

struct MonteCarloSummary {
  int runs = 0;
  std::vector<Matrix> empirical_deviation_cov;  // sample cov of xhat_pub - xhat
  std::vector<Matrix> predicted_deviation_cov;  // deviation recursion Q^k
  double empirical_objective_mean = 0.0;
  double empirical_objective_se = 0.0;
  double predicted_objective =
      std::numeric_limits<double>::quiet_NaN();  // NaN in doubtful mode
};

/// Seeded Monte Carlo over independent runs; run r uses mix_seed(master, r).
/// Accumulation happens in run-index order, so the summary is identical for
/// a given (inputs, master_seed) no matter how execution is organized.
inline MonteCarloSummary monte_carlo(const SystemModel& model,
                                     const LqgWeights& weights,
                                     const PrivacyScheme& scheme, int T,
                                     int runs, std::uint64_t master_seed,
                                     ServerMode mode) {
  if (runs < 2) throw std::invalid_argument("monte_carlo: runs must be >= 2");
  const ClosedLoopGains gains =
      make_closed_loop_gains(model, weights, scheme, T, mode);

  const Eigen::Index n = model.n();
  std::vector<Vector> dev_sum(T + 1, Vector::Zero(n));
  std::vector<Matrix> dev_outer(T + 1, Matrix::Zero(n, n));
  double obj_sum = 0.0;
  double obj_sumsq = 0.0;

  for (int r = 0; r < runs; ++r) {
    const TrajectoryLog log =
        run_closed_loop(model, scheme, T, mix_seed(master_seed, r), mode, gains);
    for (int k = 0; k <= T; ++k) {
      const Vector d = log.xhat_pub[k] - log.xhat[k];
      dev_sum[k] += d;
      dev_outer[k] += d * d.transpose();
    }
    const double j = realized_objective(log, weights);
    obj_sum += j;
    obj_sumsq += j * j;
  }

  MonteCarloSummary summary;
  summary.runs = runs;
  summary.empirical_deviation_cov.resize(T + 1);
  for (int k = 0; k <= T; ++k) {
    const Vector mean = dev_sum[k] / runs;
    summary.empirical_deviation_cov[k] = symmetrize(
        (dev_outer[k] - runs * mean * mean.transpose()) / (runs - 1.0));
  }
  summary.predicted_deviation_cov =
      deviation_recursion(gains.filt, model, scheme, T);

  summary.empirical_objective_mean = obj_sum / runs;
  const double var =
      (obj_sumsq - runs * summary.empirical_objective_mean *
                       summary.empirical_objective_mean) /
      (runs - 1.0);
  summary.empirical_objective_se = std::sqrt(std::max(var, 0.0) / runs);

  if (mode == ServerMode::Honest) {
    DeviationAnalysis dev;
    dev.Qk = summary.predicted_deviation_cov;
    summary.predicted_objective =
        objective_with_privacy(model, gains.lqg, gains.filt, dev, T).total;
  }
  return summary;
}

/// Perfect-state scenario: the server sees x_pub_k = x_k + delta_k directly
/// and applies u_k = L_k x_pub_k. Used to confirm that kernel-direction
/// injections leave the control sequence untouched.
struct PerfectStateLog {
  std::vector<Vector> x;      // k = 0..T
  std::vector<Vector> x_pub;  // k = 0..T
  std::vector<Vector> u;      // k = 0..T-1
  std::uint64_t seed = 0;
};

inline PerfectStateLog run_perfect_state_loop(const SystemModel& model,
                                              const LqgWeights& weights, int T,
                                              std::uint64_t seed,
                                              const PerfectPrivacyPlan* inject =
                                                  nullptr) {
  const LqgSolution lqg = backward_riccati(model, weights, T);
  std::mt19937_64 noise_rng(mix_seed(seed, 1));
  GaussianSampler init_sampler(model.x0_cov);
  GaussianSampler process_sampler(model.Q);

  PerfectStateLog log;
  log.seed = seed;
  log.x.resize(T + 1);
  log.x_pub.resize(T + 1);
  log.u.resize(T);
  log.x[0] = model.x0_mean + init_sampler.sample(noise_rng);
  for (int k = 0; k < T; ++k) {
    const Vector delta = inject ? inject->delta_seq.at(k)
                                : Vector::Zero(model.n()).eval();
    log.x_pub[k] = log.x[k] + delta;
    log.u[k] = lqg.L_at(k) * log.x_pub[k];
    log.x[k + 1] = model.A * log.x[k] + model.B * log.u[k] +
                   process_sampler.sample(noise_rng);
  }
  log.x_pub[T] = log.x[T];
  return log;
}

}  // namespace lqgpriv
