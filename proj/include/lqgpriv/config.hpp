#pragma once

// JSON experiment configuration for the command-line driver. Matrices are
// nested arrays in row-major order; errors carry the dotted path of the
// offending field.

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "lqgpriv/model.hpp"
#include "lqgpriv/sim.hpp"

namespace lqgpriv {

struct SweepConfig {
  double alpha_min = 0.0;
  double alpha_max = 0.0;
  double alpha_step = 1.0;
};

struct SimConfig {
  int runs = 0;
  int T = 0;
  std::uint64_t master_seed = 0;
  ServerMode server_mode = ServerMode::Honest;
};

struct ExperimentConfig {
  SystemModel model;
  LqgWeights weights;
  Horizon horizon = Horizon::infinite();
  std::optional<PrivacyScheme> scheme;
  std::optional<SweepConfig> sweep;
  std::optional<SimConfig> sim;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj,
                                           const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError(path + ": required");
  }
  return obj.at(key);
}

inline double parse_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline Matrix parse_matrix(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(path + ": expected a non-empty array of rows");
  }
  const auto& first = j.at(0);
  if (!first.is_array() || first.empty()) {
    throw ConfigError(path + ": expected nested arrays (rows of numbers)");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = first.size();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j.at(r);
    if (!row.is_array() || row.size() != cols) {
      throw ConfigError(path + ": row " + std::to_string(r) +
                        " must have " + std::to_string(cols) + " entries");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row.at(c).is_number()) {
        throw ConfigError(path + ": entry (" + std::to_string(r) + "," +
                          std::to_string(c) + ") must be a number");
      }
      out(r, c) = row.at(c).get<double>();
    }
  }
  return out;
}

inline Vector parse_vector(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(path + ": expected a non-empty numeric array");
  }
  Vector out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j.at(i).is_number()) {
      throw ConfigError(path + ": entry " + std::to_string(i) +
                        " must be a number");
    }
    out(i) = j.at(i).get<double>();
  }
  return out;
}

inline void require_shape(const Matrix& x, Eigen::Index rows,
                          Eigen::Index cols, const std::string& path) {
  if (x.rows() != rows || x.cols() != cols) {
    throw ConfigError(path + ": expected " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", got " +
                      std::to_string(x.rows()) + "x" +
                      std::to_string(x.cols()));
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
  using detail::parse_matrix;
  using detail::parse_number;
  using detail::parse_vector;
  using detail::require_field;
  using detail::require_shape;

  ExperimentConfig config;

  const auto& jmodel = require_field(root, "model");
  config.model.A = parse_matrix(require_field(jmodel, "model.A"), "model.A");
  if (config.model.A.rows() != config.model.A.cols()) {
    throw ConfigError("model.A: must be square");
  }
  const Eigen::Index n = config.model.A.rows();
  config.model.B = parse_matrix(require_field(jmodel, "model.B"), "model.B");
  if (config.model.B.rows() != n) {
    throw ConfigError("model.B: expected " + std::to_string(n) + " rows");
  }
  const Eigen::Index m = config.model.B.cols();
  config.model.C = parse_matrix(require_field(jmodel, "model.C"), "model.C");
  if (config.model.C.cols() != n) {
    throw ConfigError("model.C: expected " + std::to_string(n) + " columns");
  }
  const Eigen::Index p = config.model.C.rows();
  config.model.Q = parse_matrix(require_field(jmodel, "model.Q"), "model.Q");
  require_shape(config.model.Q, n, n, "model.Q");
  config.model.R = parse_matrix(require_field(jmodel, "model.R"), "model.R");
  require_shape(config.model.R, p, p, "model.R");
  config.model.x0_mean =
      parse_vector(require_field(jmodel, "model.x0_mean"), "model.x0_mean");
  if (config.model.x0_mean.size() != n) {
    throw ConfigError("model.x0_mean: expected " + std::to_string(n) +
                      " entries");
  }
  config.model.x0_cov =
      parse_matrix(require_field(jmodel, "model.x0_cov"), "model.x0_cov");
  require_shape(config.model.x0_cov, n, n, "model.x0_cov");

  const auto& jweights = require_field(root, "weights");
  config.weights.W =
      parse_matrix(require_field(jweights, "weights.W"), "weights.W");
  require_shape(config.weights.W, n, n, "weights.W");
  config.weights.U =
      parse_matrix(require_field(jweights, "weights.U"), "weights.U");
  require_shape(config.weights.U, m, m, "weights.U");

  const auto& jhorizon = require_field(root, "horizon");
  if (jhorizon.is_string()) {
    if (jhorizon.get<std::string>() != "infinite") {
      throw ConfigError("horizon: expected a positive integer or \"infinite\"");
    }
    config.horizon = Horizon::infinite();
  } else if (jhorizon.is_number_integer() && jhorizon.get<long long>() >= 1) {
    config.horizon = Horizon::finite(static_cast<int>(jhorizon.get<long long>()));
  } else {
    throw ConfigError("horizon: expected a positive integer or \"infinite\"");
  }

  if (root.contains("scheme")) {
    PrivacyScheme scheme;
    scheme.sigma_delta = parse_matrix(
        require_field(root.at("scheme"), "scheme.sigma_delta"),
        "scheme.sigma_delta");
    require_shape(scheme.sigma_delta, p, p, "scheme.sigma_delta");
    config.scheme = scheme;
  }

  if (root.contains("sweep")) {
    const auto& jsweep = root.at("sweep");
    SweepConfig sweep;
    sweep.alpha_min =
        parse_number(require_field(jsweep, "sweep.alpha_min"), "sweep.alpha_min");
    sweep.alpha_max =
        parse_number(require_field(jsweep, "sweep.alpha_max"), "sweep.alpha_max");
    sweep.alpha_step = parse_number(require_field(jsweep, "sweep.alpha_step"),
                                    "sweep.alpha_step");
    if (sweep.alpha_min < 0.0) throw ConfigError("sweep.alpha_min: must be >= 0");
    if (sweep.alpha_max < sweep.alpha_min) {
      throw ConfigError("sweep.alpha_max: must be >= alpha_min");
    }
    if (sweep.alpha_step <= 0.0) throw ConfigError("sweep.alpha_step: must be > 0");
    config.sweep = sweep;
  }

  if (root.contains("sim")) {
    const auto& jsim = root.at("sim");
    SimConfig sim;
    const double runs = parse_number(require_field(jsim, "sim.runs"), "sim.runs");
    if (runs < 1 || runs != static_cast<int>(runs)) {
      throw ConfigError("sim.runs: must be a positive integer");
    }
    sim.runs = static_cast<int>(runs);
    const double t = parse_number(require_field(jsim, "sim.T"), "sim.T");
    if (t < 1 || t != static_cast<int>(t)) {
      throw ConfigError("sim.T: must be a positive integer");
    }
    sim.T = static_cast<int>(t);
    const auto& jseed = require_field(jsim, "sim.master_seed");
    if (!jseed.is_number_integer() && !jseed.is_number_unsigned()) {
      throw ConfigError("sim.master_seed: must be an integer");
    }
    sim.master_seed = jseed.get<std::uint64_t>();
    const auto& jmode = require_field(jsim, "sim.server_mode");
    const std::string mode = jmode.is_string() ? jmode.get<std::string>() : "";
    if (mode == "honest") {
      sim.server_mode = ServerMode::Honest;
    } else if (mode == "doubtful") {
      sim.server_mode = ServerMode::Doubtful;
    } else {
      throw ConfigError("sim.server_mode: expected \"honest\" or \"doubtful\"");
    }
    config.sim = sim;
  }

  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw ConfigError(std::string("config is not valid JSON: ") + err.what());
  }
  return parse_config(root);
}

}  // namespace lqgpriv
