// Command-line front end: reads a JSON experiment configuration and writes
// CSV files for gain computation, deviation analysis, the privacy/performance
// trade-off sweep, and seeded closed-loop simulation.
//
// Exit codes: 0 success, 2 configuration or validation error, 3 numerical
// failure. Diagnostics go to stderr; all data goes to files under --out.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lqgpriv/config.hpp"
#include "lqgpriv/csv.hpp"
#include "lqgpriv/deviation.hpp"
#include "lqgpriv/kalman.hpp"
#include "lqgpriv/model.hpp"
#include "lqgpriv/objective.hpp"
#include "lqgpriv/riccati.hpp"
#include "lqgpriv/sim.hpp"
#include "lqgpriv/tradeoff.hpp"

namespace {

using namespace lqgpriv;

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

std::ofstream open_output(const Options& opts, const std::string& name) {
  namespace fs = std::filesystem;
  fs::create_directories(opts.out_dir);
  const fs::path path = fs::path(opts.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path.string());
  return out;
}

const PrivacyScheme& require_scheme(const ExperimentConfig& config) {
  if (!config.scheme) throw ConfigError("scheme: required");
  return *config.scheme;
}

void run_gains(const ExperimentConfig& config, const Options& opts) {
  const SystemModel& model = config.model;
  std::ofstream file = open_output(opts, "gains.csv");
  CsvWriter csv(file);
  csv.field("k")
      .matrix_header("S", model.n(), model.n())
      .matrix_header("L", model.m(), model.n())
      .matrix_header("Phi", model.n(), model.n())
      .matrix_header("Ppred", model.n(), model.n())
      .matrix_header("Pfilt", model.n(), model.n())
      .matrix_header("K", model.n(), model.p());
  csv.end_row();

  if (config.horizon.is_infinite()) {
    const LqgSolution lqg = steady_lqg(model, config.weights);
    const FilterSolution filt = steady_kalman(model);
    csv.blank()
        .matrix_fields(lqg.S_at(0))
        .matrix_fields(lqg.L_at(0))
        .matrix_fields(lqg.Phi_at(0))
        .matrix_fields(filt.P_pred_at(1))
        .matrix_fields(filt.P_filt_at(0))
        .matrix_fields(filt.K_at(1));
    csv.end_row();
    return;
  }

  const int T = config.horizon.T();
  const LqgSolution lqg = backward_riccati(model, config.weights, T);
  const FilterSolution filt = covariance_recursion(model, T);
  for (int k = 0; k <= T; ++k) {
    csv.field(k).matrix_fields(lqg.S_at(k));
    if (k < T) {
      csv.matrix_fields(lqg.L_at(k)).matrix_fields(lqg.Phi_at(k));
    } else {
      csv.blanks(model.m() * model.n()).blanks(model.n() * model.n());
    }
    if (k >= 1) {
      csv.matrix_fields(filt.P_pred_at(k));
    } else {
      csv.blanks(model.n() * model.n());
    }
    csv.matrix_fields(filt.P_filt_at(k));
    if (k >= 1) {
      csv.matrix_fields(filt.K_at(k));
    } else {
      csv.blanks(model.n() * model.p());
    }
    csv.end_row();
  }
}

void run_analyze(const ExperimentConfig& config, const Options& opts) {
  const SystemModel& model = config.model;
  const PrivacyScheme& scheme = require_scheme(config);

  std::ofstream afile = open_output(opts, "analysis.csv");
  CsvWriter acsv(afile);
  acsv.field("k")
      .field("tr_Qk")
      .field("tr_Mk")
      .field("tr_Pfilt")
      .field("tr_Ppubreal");
  acsv.end_row();

  std::ofstream ofile = open_output(opts, "objective.csv");
  CsvWriter ocsv(ofile);
  ocsv.field("initial_term")
      .field("process_noise_term")
      .field("estimation_term")
      .field("privacy_term")
      .field("total")
      .field("q_lqg");
  ocsv.end_row();

  if (config.horizon.is_infinite()) {
    const LqgSolution lqg = steady_lqg(model, config.weights);
    const FilterSolution filt = steady_kalman(model);
    const Matrix q_privacy = steady_deviation(filt.F, filt.K_at(1), scheme);
    const Matrix bound = steady_lower_bound(model, scheme);
    acsv.blank()
        .field(q_privacy.trace())
        .field(bound.trace())
        .field(filt.P_filt_at(0).trace())
        .field((filt.P_filt_at(0) + q_privacy).trace());
    acsv.end_row();

    // Per-step rates: the initial condition contributes nothing per step.
    const double process_rate = (lqg.S_at(0) * model.Q).trace();
    const double estimation_rate = (lqg.Phi_at(0) * filt.P_filt_at(0)).trace();
    const double privacy_rate = steady_lqg_loss(lqg.Phi_at(0), q_privacy);
    ocsv.field(0.0)
        .field(process_rate)
        .field(estimation_rate)
        .field(privacy_rate)
        .field(process_rate + estimation_rate + privacy_rate)
        .field(privacy_rate);
    ocsv.end_row();
    return;
  }

  const int T = config.horizon.T();
  const LqgSolution lqg = backward_riccati(model, config.weights, T);
  const FilterSolution filt = covariance_recursion(model, T);
  const DeviationAnalysis analysis = analyze_deviation(model, scheme, filt, T);
  for (int k = 0; k <= T; ++k) {
    acsv.field(k)
        .field(analysis.Qk[k].trace())
        .field(analysis.Mk[k].trace())
        .field(filt.P_filt_at(k).trace())
        .field(analysis.P_pub_real[k].trace());
    acsv.end_row();
  }

  const ObjectiveBreakdown objective =
      objective_with_privacy(model, lqg, filt, analysis, T);
  ocsv.field(objective.initial_term)
      .field(objective.process_noise_term)
      .field(objective.estimation_term)
      .field(objective.privacy_term)
      .field(objective.total)
      .field(objective.q_lqg);
  ocsv.end_row();
}

void run_tradeoff(const ExperimentConfig& config, const Options& opts) {
  const SystemModel& model = config.model;
  if (!config.sweep) throw ConfigError("sweep: required");
  const SweepConfig& sweep = *config.sweep;

  LinearMaps maps;
  if (config.horizon.is_infinite()) {
    const LqgSolution lqg = steady_lqg(model, config.weights);
    const FilterSolution filt = steady_kalman(model);
    maps = build_maps_infinite(filt.F, filt.K_at(1), lqg.Phi_at(0));
  } else {
    const int T = config.horizon.T();
    const LqgSolution lqg = backward_riccati(model, config.weights, T);
    const FilterSolution filt = covariance_recursion(model, T);
    maps = build_maps_finite(model, lqg, filt, T);
  }

  std::ofstream file = open_output(opts, "tradeoff.csv");
  CsvWriter csv(file);
  csv.field("alpha")
      .field("tr_privacy_star")
      .field("q_lqg_achieved")
      .field("bounded")
      .matrix_header("sigma_star", model.p(), model.p())
      .vector_header("direction", model.p());
  csv.end_row();

  const int count = static_cast<int>(
      std::floor((sweep.alpha_max - sweep.alpha_min) / sweep.alpha_step + 1e-9));
  for (int i = 0; i <= count; ++i) {
    const double alpha = sweep.alpha_min + i * sweep.alpha_step;
    const TradeoffResult result = solve_tradeoff(maps, alpha);
    csv.field(alpha);
    if (result.bounded) {
      csv.field(result.tr_privacy_star)
          .field(result.q_lqg_achieved)
          .field("true")
          .matrix_fields(result.sigma_delta_star)
          .blanks(model.p());
    } else {
      csv.blank().blank().field("false").blanks(model.p() * model.p());
      csv.vector_fields(*result.unbounded_direction);
    }
    csv.end_row();
  }
}

void run_simulate(const ExperimentConfig& config, const Options& opts) {
  const SystemModel& model = config.model;
  const PrivacyScheme& scheme = require_scheme(config);
  if (!config.sim) throw ConfigError("sim: required");
  const SimConfig& sim = *config.sim;

  const std::uint64_t seed = opts.seed.value_or(sim.master_seed);
  ServerMode mode = sim.server_mode;
  if (opts.mode) {
    mode = *opts.mode == "doubtful" ? ServerMode::Doubtful : ServerMode::Honest;
  }
  const bool doubtful = mode == ServerMode::Doubtful;

  const TrajectoryLog log =
      run_closed_loop(model, config.weights, scheme, sim.T, seed, mode);
  std::ofstream tfile = open_output(opts, "trajectory.csv");
  CsvWriter tcsv(tfile);
  tcsv.field("k")
      .vector_header("x", model.n())
      .vector_header("y", model.p())
      .vector_header("z", model.p())
      .vector_header("u", model.m())
      .vector_header("xhat", model.n())
      .vector_header("xhatpub", model.n());
  if (doubtful) tcsv.vector_header("xhatsvr", model.n());
  tcsv.end_row();
  for (int k = 0; k <= sim.T; ++k) {
    tcsv.field(k).vector_fields(log.x[k]);
    if (k >= 1) {
      tcsv.vector_fields(log.y[k]).vector_fields(log.z[k]);
    } else {
      tcsv.blanks(2 * model.p());
    }
    if (k < sim.T) {
      tcsv.vector_fields(log.u[k]);
    } else {
      tcsv.blanks(model.m());
    }
    tcsv.vector_fields(log.xhat[k]).vector_fields(log.xhat_pub[k]);
    if (doubtful) tcsv.vector_fields(log.xhat_svr[k]);
    tcsv.end_row();
  }

  const MonteCarloSummary mc =
      monte_carlo(model, config.weights, scheme, sim.T, sim.runs, seed, mode);
  std::ofstream mfile = open_output(opts, "montecarlo.csv");
  CsvWriter mcsv(mfile);
  mcsv.field("k").field("empirical").field("predicted").field("stderr");
  mcsv.end_row();
  for (int k = 0; k <= sim.T; ++k) {
    mcsv.field(k)
        .field(mc.empirical_deviation_cov[k].trace())
        .field(mc.predicted_deviation_cov[k].trace())
        .blank();
    mcsv.end_row();
  }
  mcsv.field("objective").field(mc.empirical_objective_mean);
  if (std::isnan(mc.predicted_objective)) {
    mcsv.blank();
  } else {
    mcsv.field(mc.predicted_objective);
  }
  mcsv.field(mc.empirical_objective_se);
  mcsv.end_row();
}

int dispatch(const std::string& command, const Options& opts) {
  const ExperimentConfig config = load_config(opts.config_path);
  const ValidationReport report = validate_model(config.model, config.weights);
  if (!report.passed()) {
    for (const auto& check : report.checks) {
      if (!check.passed) {
        std::cerr << "validation failed: " << check.name
                  << (check.detail.empty() ? "" : " (" + check.detail + ")")
                  << "\n";
      }
    }
    return 2;
  }
  if (command == "gains") {
    run_gains(config, opts);
  } else if (command == "analyze") {
    run_analyze(config, opts);
  } else if (command == "tradeoff") {
    run_tradeoff(config, opts);
  } else {
    run_simulate(config, opts);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative LQG control with local measurement-noise "
               "injection: gains, deviation analysis, trade-off sweeps, and "
               "seeded closed-loop simulation"};
  app.require_subcommand(1);

  Options opts;
  const auto add_common = [&opts](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON experiment config")
        ->required();
    sub->add_option("--out", opts.out_dir, "output directory (default: .)");
    sub->add_option("--seed", opts.seed, "override sim.master_seed");
    sub->add_option("--mode", opts.mode, "override sim.server_mode")
        ->check(CLI::IsMember({"honest", "doubtful"}));
  };
  add_common(app.add_subcommand("gains", "LQG and Kalman gain sequences"));
  add_common(app.add_subcommand("analyze",
                                "deviation covariance, bound, and objective"));
  add_common(app.add_subcommand("tradeoff", "privacy/performance sweep"));
  add_common(app.add_subcommand("simulate",
                                "closed-loop trajectory and Monte Carlo"));

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    return dispatch(command, opts);
  } catch (const ConfigError& err) {
    std::cerr << err.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << err.what() << "\n";
    return 3;
  }
}
