// End-to-end tests of the command-line driver: config ingestion, exit codes,
// and the CSV contracts of every subcommand.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lqgpriv/kalman.hpp"
#include "test_util.hpp"

#ifndef LQGPRIV_CLI_PATH
#error "LQGPRIV_CLI_PATH must point at the CLI binary"
#endif

namespace lqgpriv {
namespace {

namespace fs = std::filesystem;

struct CommandResult {
  int exit_code = -1;
  std::string stderr_text;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lqgpriv_cli_test_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path path = dir_ / name;
    std::ofstream out(path);
    out << body;
    return path;
  }

  CommandResult run(const std::string& args) {
    const fs::path err_path = dir_ / "stderr.txt";
    const std::string cmd = std::string(LQGPRIV_CLI_PATH) + " " + args +
                            " 2> " + err_path.string();
    const int status = std::system(cmd.c_str());
    CommandResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream err(err_path);
    std::stringstream buffer;
    buffer << err.rdbuf();
    result.stderr_text = buffer.str();
    return result;
  }

  static std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    EXPECT_TRUE(in.good()) << "missing file " << path;
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> fields;
      std::string field;
      std::stringstream ss(line);
      while (std::getline(ss, field, ',')) fields.push_back(field);
      if (!line.empty() && line.back() == ',') fields.push_back("");
      rows.push_back(fields);
    }
    return rows;
  }

  static int column(const std::vector<std::string>& header,
                    const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    ADD_FAILURE() << "column " << name << " not found";
    return -1;
  }

  static std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  }

  fs::path dir_;
};

const char* kScalarModelBlock = R"json(
  "model": {
    "A": [[1.1]], "B": [[3.0]], "C": [[1.0]],
    "Q": [[2.5]], "R": [[1.0]],
    "x0_mean": [0.0], "x0_cov": [[1.0]]
  },
  "weights": {"W": [[5.0]], "U": [[3.0]]}
)json";

std::string scalar_config(const std::string& horizon,
                          const std::string& extra = "") {
  return "{" + std::string(kScalarModelBlock) + ", \"horizon\": " + horizon +
         extra + "}";
}

const char* kThirdOrderBlock = R"json(
  "model": {
    "A": [[0.19, 0.86, 0.10], [0.31, 0.80, 0.44], [0.13, 0.43, 0.40]],
    "B": [[2.0, 0.9], [9.1, 2.0], [1.3, 8.1]],
    "C": [[2.0, 1.6, 1.2], [2.0, 2.0, 1.1]],
    "Q": [[1.9, 0.9, 0.4], [0.9, 2.8, 2.0], [0.4, 2.0, 2.4]],
    "R": [[7.0, 1.8], [1.8, 0.8]],
    "x0_mean": [0.0, 0.0, 0.0],
    "x0_cov": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
  },
  "weights": {
    "W": [[1.8, 2.0, 0.5], [2.0, 9.8, 0.9], [0.5, 0.9, 5.4]],
    "U": [[4.5, 1.0], [1.0, 8.8]]
  }
)json";

std::string third_order_config(const std::string& horizon,
                               const std::string& extra = "") {
  return "{" + std::string(kThirdOrderBlock) + ", \"horizon\": " + horizon +
         extra + "}";
}

TEST_F(CliTest, GainsSteadyWritesOneRow) {
  const fs::path config = write_config("c.json", scalar_config("\"infinite\""));
  const CommandResult result =
      run("gains --config " + config.string() + " --out " + dir_.string());
  ASSERT_EQ(result.exit_code, 0) << result.stderr_text;
  const auto rows = read_csv(dir_ / "gains.csv");
  ASSERT_EQ(rows.size(), 2u);
  const int k_col = column(rows[0], "K_0_0");
  EXPECT_NEAR(std::stod(rows[1][k_col]), 0.77463836076164785, 1e-9);
}

TEST_F(CliTest, GainsRoundTripsSteadyValueExactly) {
  const fs::path config = write_config("c.json", scalar_config("\"infinite\""));
  ASSERT_EQ(run("gains --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            0);
  const auto rows = read_csv(dir_ / "gains.csv");
  const int k_col = column(rows[0], "K_0_0");
  const double from_library =
      steady_kalman(testing::example2_model()).K_at(1)(0, 0);
  EXPECT_EQ(std::stod(rows[1][k_col]), from_library);
}

TEST_F(CliTest, GainsTerminalRowEqualsStateWeight) {
  const fs::path config = write_config("c.json", scalar_config("1"));
  ASSERT_EQ(run("gains --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            0);
  const auto rows = read_csv(dir_ / "gains.csv");
  ASSERT_EQ(rows.size(), 3u);  // header + k = 0, 1
  const int s_col = column(rows[0], "S_0_0");
  const int l_col = column(rows[0], "L_0_0");
  EXPECT_EQ(std::stod(rows[2][s_col]), 5.0);  // terminal cost equals W
  EXPECT_EQ(rows[2][l_col], "");              // no gain at the final step
}

TEST_F(CliTest, MissingMeasurementNoiseGivesExit2) {
  const std::string body = R"json({
    "model": {
      "A": [[1.1]], "B": [[3.0]], "C": [[1.0]],
      "Q": [[2.5]],
      "x0_mean": [0.0], "x0_cov": [[1.0]]
    },
    "weights": {"W": [[5.0]], "U": [[3.0]]},
    "horizon": 10
  })json";
  const fs::path config = write_config("c.json", body);
  const CommandResult result =
      run("gains --config " + config.string() + " --out " + dir_.string());
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_NE(result.stderr_text.find("model.R: required"), std::string::npos);
}

TEST_F(CliTest, InvalidJsonGivesExit2) {
  const fs::path config = write_config("c.json", "{not json");
  EXPECT_EQ(run("gains --config " + config.string()).exit_code, 2);
}

TEST_F(CliTest, FailedValidationGivesExit2) {
  const std::string body = R"json({
    "model": {
      "A": [[1.1]], "B": [[3.0]], "C": [[1.0]],
      "Q": [[2.5]], "R": [[0.0]],
      "x0_mean": [0.0], "x0_cov": [[1.0]]
    },
    "weights": {"W": [[5.0]], "U": [[3.0]]},
    "horizon": 10
  })json";
  const fs::path config = write_config("c.json", body);
  const CommandResult result =
      run("gains --config " + config.string() + " --out " + dir_.string());
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_NE(result.stderr_text.find("positive definite"), std::string::npos);
}

TEST_F(CliTest, AnalyzeEmitsRowPerStepWithExactIdentity) {
  const std::string extra = R"json(,
    "scheme": {"sigma_delta": [[100.0, 0.0], [0.0, 100.0]]})json";
  const fs::path config =
      write_config("c.json", third_order_config("100", extra));
  ASSERT_EQ(run("analyze --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            0);
  const auto rows = read_csv(dir_ / "analysis.csv");
  ASSERT_EQ(rows.size(), 102u);  // header + k = 0..100
  const int q_col = column(rows[0], "tr_Qk");
  const int p_col = column(rows[0], "tr_Pfilt");
  const int real_col = column(rows[0], "tr_Ppubreal");
  const int m_col = column(rows[0], "tr_Mk");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double q = std::stod(rows[i][q_col]);
    const double p = std::stod(rows[i][p_col]);
    const double real = std::stod(rows[i][real_col]);
    EXPECT_LE(std::abs(real - (p + q)), 1e-9 * (1.0 + std::abs(real)));
    EXPECT_LE(std::stod(rows[i][m_col]), q + 1e-9);
  }
  const auto objective = read_csv(dir_ / "objective.csv");
  ASSERT_EQ(objective.size(), 2u);
  const int total_col = column(objective[0], "total");
  const int privacy_col = column(objective[0], "privacy_term");
  EXPECT_GT(std::stod(objective[1][total_col]), 0.0);
  EXPECT_GT(std::stod(objective[1][privacy_col]), 0.0);
}

TEST_F(CliTest, AnalyzeZeroInjectionZeroesDeviationColumn) {
  const std::string extra = R"json(, "scheme": {"sigma_delta": [[0.0]]})json";
  const fs::path config = write_config("c.json", scalar_config("20", extra));
  ASSERT_EQ(run("analyze --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            0);
  const auto rows = read_csv(dir_ / "analysis.csv");
  const int q_col = column(rows[0], "tr_Qk");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(std::stod(rows[i][q_col]), 0.0);
  }
}

TEST_F(CliTest, AnalyzeRequiresScheme) {
  const fs::path config = write_config("c.json", scalar_config("20"));
  const CommandResult result =
      run("analyze --config " + config.string() + " --out " + dir_.string());
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_NE(result.stderr_text.find("scheme: required"), std::string::npos);
}

TEST_F(CliTest, TradeoffSweepIsLinearInBudget) {
  const std::string extra = R"json(,
    "sweep": {"alpha_min": 0.0, "alpha_max": 50.0, "alpha_step": 1.0})json";
  const fs::path config =
      write_config("c.json", third_order_config("\"infinite\"", extra));
  ASSERT_EQ(run("tradeoff --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            0);
  const auto rows = read_csv(dir_ / "tradeoff.csv");
  ASSERT_EQ(rows.size(), 52u);  // header + 51 budgets
  const int alpha_col = column(rows[0], "alpha");
  const int tr_col = column(rows[0], "tr_privacy_star");
  const int bounded_col = column(rows[0], "bounded");
  const int sigma_col = column(rows[0], "sigma_star_0_0");

  // Linear regression of tr against alpha must be essentially exact.
  double sum_a = 0.0, sum_t = 0.0, sum_aa = 0.0, sum_at = 0.0, sum_tt = 0.0;
  const double count = 51.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][bounded_col], "true");
    const double alpha = std::stod(rows[i][alpha_col]);
    const double tr = std::stod(rows[i][tr_col]);
    sum_a += alpha;
    sum_t += tr;
    sum_aa += alpha * alpha;
    sum_at += alpha * tr;
    sum_tt += tr * tr;
  }
  const double cov_at = sum_at - sum_a * sum_t / count;
  const double var_a = sum_aa - sum_a * sum_a / count;
  const double var_t = sum_tt - sum_t * sum_t / count;
  const double r_squared = (cov_at * cov_at) / (var_a * var_t);
  EXPECT_GT(r_squared, 1.0 - 1e-9);

  EXPECT_EQ(std::stod(rows[1][alpha_col]), 0.0);
  EXPECT_EQ(std::stod(rows[1][sigma_col]), 0.0);
}

TEST_F(CliTest, TradeoffScalarBudgetOneMatchesClosedForm) {
  const std::string extra = R"json(,
    "sweep": {"alpha_min": 1.0, "alpha_max": 1.0, "alpha_step": 1.0})json";
  const fs::path config =
      write_config("c.json", scalar_config("\"infinite\"", extra));
  ASSERT_EQ(run("tradeoff --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            0);
  const auto rows = read_csv(dir_ / "tradeoff.csv");
  ASSERT_EQ(rows.size(), 2u);
  const int sigma_col = column(rows[0], "sigma_star_0_0");
  EXPECT_NEAR(std::stod(rows[1][sigma_col]), 0.25516114160506592, 1e-8);
}

TEST_F(CliTest, TradeoffRequiresSweep) {
  const fs::path config = write_config("c.json", scalar_config("\"infinite\""));
  const CommandResult result =
      run("tradeoff --config " + config.string() + " --out " + dir_.string());
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_NE(result.stderr_text.find("sweep: required"), std::string::npos);
}

std::string scalar_sim_config(double sigma, int runs, int T,
                              const std::string& mode = "honest") {
  std::ostringstream extra;
  extra << ", \"scheme\": {\"sigma_delta\": [[" << sigma << "]]},"
        << "\"sim\": {\"runs\": " << runs << ", \"T\": " << T
        << ", \"master_seed\": 1, \"server_mode\": \"" << mode << "\"}";
  return scalar_config("49", extra.str());
}

TEST_F(CliTest, SimulateWritesTrajectoryAndMonteCarlo) {
  const fs::path config =
      write_config("c.json", scalar_sim_config(1.0, 50, 49));
  ASSERT_EQ(run("simulate --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            0);
  const auto traj = read_csv(dir_ / "trajectory.csv");
  ASSERT_EQ(traj.size(), 51u);  // header + k = 0..49
  const int xhat_col = column(traj[0], "xhat_0");
  const int pub_col = column(traj[0], "xhatpub_0");
  double max_gap = 0.0;
  for (std::size_t i = 2; i < traj.size(); ++i) {  // k >= 1
    max_gap = std::max(max_gap, std::abs(std::stod(traj[i][xhat_col]) -
                                         std::stod(traj[i][pub_col])));
  }
  EXPECT_GT(max_gap, 1e-3);

  const auto mc = read_csv(dir_ / "montecarlo.csv");
  ASSERT_EQ(mc.size(), 52u);  // header + k rows + objective footer
  EXPECT_EQ(mc.back()[0], "objective");
  const int pred_col = column(mc[0], "predicted");
  const int emp_col = column(mc[0], "empirical");
  EXPECT_GT(std::stod(mc.back()[emp_col]), 0.0);
  EXPECT_GT(std::stod(mc.back()[pred_col]), 0.0);
}

TEST_F(CliTest, SimulateIsDeterministic) {
  const fs::path config =
      write_config("c.json", scalar_sim_config(1.0, 20, 30));
  const fs::path out_a = dir_ / "a";
  const fs::path out_b = dir_ / "b";
  ASSERT_EQ(run("simulate --config " + config.string() + " --out " +
                out_a.string())
                .exit_code,
            0);
  ASSERT_EQ(run("simulate --config " + config.string() + " --out " +
                out_b.string())
                .exit_code,
            0);
  EXPECT_EQ(read_file(out_a / "trajectory.csv"),
            read_file(out_b / "trajectory.csv"));
  EXPECT_EQ(read_file(out_a / "montecarlo.csv"),
            read_file(out_b / "montecarlo.csv"));
}

TEST_F(CliTest, SimulateZeroInjectionKeepsColumnsIdentical) {
  const fs::path config =
      write_config("c.json", scalar_sim_config(0.0, 10, 20));
  ASSERT_EQ(run("simulate --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            0);
  const auto traj = read_csv(dir_ / "trajectory.csv");
  const int xhat_col = column(traj[0], "xhat_0");
  const int pub_col = column(traj[0], "xhatpub_0");
  for (std::size_t i = 1; i < traj.size(); ++i) {
    EXPECT_EQ(traj[i][xhat_col], traj[i][pub_col]);
  }
}

TEST_F(CliTest, SimulateSeedOverrideChangesRealization) {
  const fs::path config =
      write_config("c.json", scalar_sim_config(1.0, 10, 20));
  const fs::path out_a = dir_ / "a";
  const fs::path out_b = dir_ / "b";
  ASSERT_EQ(run("simulate --config " + config.string() + " --out " +
                out_a.string() + " --seed 999")
                .exit_code,
            0);
  ASSERT_EQ(run("simulate --config " + config.string() + " --out " +
                out_b.string())
                .exit_code,
            0);
  EXPECT_NE(read_file(out_a / "trajectory.csv"),
            read_file(out_b / "trajectory.csv"));
}

TEST_F(CliTest, SimulateDoubtfulModeAddsServerColumns) {
  const fs::path config =
      write_config("c.json", scalar_sim_config(1.0, 10, 20, "doubtful"));
  ASSERT_EQ(run("simulate --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            0);
  const auto traj = read_csv(dir_ / "trajectory.csv");
  const int svr_col = column(traj[0], "xhatsvr_0");
  EXPECT_GE(svr_col, 0);
  const auto mc = read_csv(dir_ / "montecarlo.csv");
  const int pred_col = column(mc[0], "predicted");
  EXPECT_EQ(mc.back()[pred_col], "");  // no closed form in doubtful mode
}

TEST_F(CliTest, SimulateRejectsSingleRunMonteCarlo) {
  const fs::path config = write_config("c.json", scalar_sim_config(1.0, 1, 20));
  EXPECT_EQ(run("simulate --config " + config.string() + " --out " +
                dir_.string())
                .exit_code,
            2);
}

}  // namespace
}  // namespace lqgpriv
