#include "lqgpriv/deviation.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"

namespace lqgpriv {
namespace {

using testing::example1_model;
using testing::example2_model;
using testing::oracle_scalar_gain;
using testing::oracle_scalar_pred_cov;
using testing::oracle_scalar_steady_deviation;
using testing::oracle_scalar_steady_lower_bound;
using testing::random_psd;
using testing::random_valid_system;

PrivacyScheme scalar_scheme(double sigma) {
  return {Matrix::Constant(1, 1, sigma)};
}

TEST(DeviationRecursion, ZeroInjectionGivesZeroDeviation) {
  const SystemModel model = example2_model();
  const auto filt = covariance_recursion(model, 20);
  const auto qk = deviation_recursion(filt, model, scalar_scheme(0.0), 20);
  for (const auto& q : qk) EXPECT_EQ(max_abs(q), 0.0);
}

TEST(DeviationRecursion, FirstStepIsGainOuterProduct) {
  const SystemModel model = example1_model();
  const PrivacyScheme scheme{100.0 * Matrix::Identity(2, 2)};
  const auto filt = covariance_recursion(model, 5);
  const auto qk = deviation_recursion(filt, model, scheme, 5);
  EXPECT_EQ(max_abs(qk[0]), 0.0);
  const Matrix expected =
      filt.K_at(1) * scheme.sigma_delta * filt.K_at(1).transpose();
  EXPECT_LE(max_abs(qk[1] - expected), 1e-12);
}

TEST(DeviationRecursion, ScalarSteadyLimitMatchesOracle) {
  const SystemModel model = example2_model();
  const auto filt = covariance_recursion(model, 400);
  const auto qk = deviation_recursion(filt, model, scalar_scheme(1.0), 400);
  const double oracle = oracle_scalar_steady_deviation(1.1, 1.0, 2.5, 1.0, 1.0);
  EXPECT_NEAR(qk[400](0, 0), oracle, 1e-8);
  EXPECT_NEAR(oracle, 0.63935508299177776, 1e-12);  // frozen oracle output
}

TEST(DeviationRecursion, LinearInInjectionCovariance) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = random_valid_system(rng);
    const auto filt = covariance_recursion(sys.model, 15);
    const Matrix s1 = random_psd(rng, sys.model.p());
    const Matrix s2 = random_psd(rng, sys.model.p());
    const double a = 0.7, b = 2.3;
    const auto q1 = deviation_recursion(filt, sys.model, {s1}, 15);
    const auto q2 = deviation_recursion(filt, sys.model, {s2}, 15);
    const auto qmix =
        deviation_recursion(filt, sys.model, {a * s1 + b * s2}, 15);
    for (int k = 0; k <= 15; ++k) {
      EXPECT_LE(max_abs(qmix[k] - a * q1[k] - b * q2[k]),
                1e-9 * (1.0 + max_abs(qmix[k])));
    }
  }
}

TEST(DeviationRecursion, MonotoneInInjectionCovariance) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = random_valid_system(rng);
    const auto filt = covariance_recursion(sys.model, 15);
    const Matrix small = random_psd(rng, sys.model.p());
    const Matrix big = small + random_psd(rng, sys.model.p());
    const auto q_small = deviation_recursion(filt, sys.model, {small}, 15);
    const auto q_big = deviation_recursion(filt, sys.model, {big}, 15);
    for (int k = 0; k <= 15; ++k) {
      EXPECT_GE(min_symmetric_eigenvalue(q_big[k] - q_small[k]), -1e-9);
    }
  }
}

TEST(DeviationLowerBound, ZeroInjectionGivesZeroBound) {
  const auto mk = deviation_lower_bound(example2_model(), scalar_scheme(0.0), 10);
  for (const auto& m : mk) EXPECT_EQ(max_abs(m), 0.0);
}

TEST(DeviationLowerBound, FirstEntryEqualsDeviation) {
  const SystemModel model = example1_model();
  const PrivacyScheme scheme{Matrix::Identity(2, 2)};
  const auto filt = covariance_recursion(model, 1);
  const auto mk = deviation_lower_bound(model, scheme, 3);
  EXPECT_EQ(max_abs(mk[0]), 0.0);
  const Matrix expected =
      filt.K_at(1) * scheme.sigma_delta * filt.K_at(1).transpose();
  EXPECT_LE(max_abs(mk[1] - expected), 1e-12);
}

TEST(DeviationLowerBound, BoundedAboveByDeviationOnRandomSystems) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sys = random_valid_system(rng);
    const PrivacyScheme scheme{random_psd(rng, sys.model.p(), 0.2)};
    const auto filt = covariance_recursion(sys.model, 50);
    const auto qk = deviation_recursion(filt, sys.model, scheme, 50);
    const auto mk = deviation_lower_bound(sys.model, scheme, 50);
    for (int k = 0; k <= 50; ++k) {
      EXPECT_GE(min_symmetric_eigenvalue(qk[k] - mk[k]), -1e-9)
          << "trial " << trial << " k " << k;
    }
  }
}

TEST(PublicRealCovariance, DefiningIdentity) {
  const SystemModel model = example1_model();
  const PrivacyScheme scheme{Matrix::Identity(2, 2)};
  const auto filt = covariance_recursion(model, 10);
  const auto qk = deviation_recursion(filt, model, scheme, 10);
  std::vector<Matrix> p_filt(11);
  for (int k = 0; k <= 10; ++k) p_filt[k] = filt.P_filt_at(k);
  const auto real_cov = public_real_covariance(p_filt, qk);
  for (int k = 0; k <= 10; ++k) {
    EXPECT_LE(max_abs(real_cov[k] - filt.P_filt_at(k) - qk[k]), 1e-14);
  }
}

TEST(PublicRealCovariance, ZeroInjectionReducesToFilterCovariance) {
  const SystemModel model = example2_model();
  const auto filt = covariance_recursion(model, 10);
  const auto qk = deviation_recursion(filt, model, scalar_scheme(0.0), 10);
  std::vector<Matrix> p_filt(11);
  for (int k = 0; k <= 10; ++k) p_filt[k] = filt.P_filt_at(k);
  const auto real_cov = public_real_covariance(p_filt, qk);
  for (int k = 0; k <= 10; ++k) {
    EXPECT_EQ(max_abs(real_cov[k] - filt.P_filt_at(k)), 0.0);
  }
}

TEST(PublicRealCovariance, ScalarSteadyValue) {
  // P + Q_privacy with P = (1 - K) p_pred for the scalar benchmark.
  const double p_pred = oracle_scalar_pred_cov(1.1, 1.0, 2.5, 1.0);
  const double gain = oracle_scalar_gain(1.1, 1.0, 2.5, 1.0);
  const double dev = oracle_scalar_steady_deviation(1.1, 1.0, 2.5, 1.0, 1.0);
  const SystemModel model = example2_model();
  const auto filt = covariance_recursion(model, 300);
  const auto qk = deviation_recursion(filt, model, scalar_scheme(1.0), 300);
  EXPECT_NEAR(filt.P_filt_at(300)(0, 0) + qk[300](0, 0),
              (1.0 - gain) * p_pred + dev, 1e-8);
}

TEST(PublicRealCovariance, LengthMismatchRejected) {
  std::vector<Matrix> a(3, Matrix::Zero(1, 1));
  std::vector<Matrix> b(4, Matrix::Zero(1, 1));
  EXPECT_THROW(public_real_covariance(a, b), std::invalid_argument);
}

TEST(SteadyDeviation, ZeroFilterDynamics) {
  const Matrix f = Matrix::Zero(2, 2);
  const Matrix gain = (Matrix(2, 2) << 1.0, 0.5, 0.0, 2.0).finished();
  const PrivacyScheme scheme{Matrix::Identity(2, 2)};
  const Matrix x = steady_deviation(f, gain, scheme);
  EXPECT_LE(max_abs(x - gain * gain.transpose()), 1e-12);
}

TEST(SteadyDeviation, ZeroInjection) {
  const auto filt = steady_kalman(example2_model());
  const Matrix x = steady_deviation(filt.F, filt.K_at(1), scalar_scheme(0.0));
  EXPECT_EQ(max_abs(x), 0.0);
}

TEST(SteadyDeviation, ScalarMatchesGeometricSeries) {
  const auto filt = steady_kalman(example2_model());
  const Matrix x = steady_deviation(filt.F, filt.K_at(1), scalar_scheme(1.0));
  EXPECT_NEAR(x(0, 0), oracle_scalar_steady_deviation(1.1, 1.0, 2.5, 1.0, 1.0),
              1e-9);
}

TEST(SteadyDeviation, UnstableDynamicsRejected) {
  const Matrix f = Matrix::Constant(1, 1, 1.05);
  try {
    steady_deviation(f, Matrix::Constant(1, 1, 1.0), scalar_scheme(1.0));
    FAIL() << "expected runtime_error";
  } catch (const std::runtime_error& err) {
    EXPECT_NE(std::string(err.what()).find("unstable"), std::string::npos);
  }
}

TEST(SteadyDeviation, MatchesIteratedRecursionWithSteadyGain) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 10; ++trial) {
    const auto sys = random_valid_system(rng);
    const PrivacyScheme scheme{random_psd(rng, sys.model.p())};
    const auto filt = steady_kalman(sys.model);
    const Matrix x = steady_deviation(filt.F, filt.K_at(1), scheme);
    // Steady accessors make the recursion use the steady gain at every k.
    const auto qk = deviation_recursion(filt, sys.model, scheme, 2000);
    EXPECT_LE(max_abs(qk[2000] - x), 1e-8 * (1.0 + max_abs(x)));
  }
}

TEST(SteadyLowerBound, ZeroInjection) {
  EXPECT_EQ(max_abs(steady_lower_bound(example2_model(), scalar_scheme(0.0))),
            0.0);
}

TEST(SteadyLowerBound, ScalarMatchesIterationOracleAndMonotone) {
  double previous = -1.0;
  for (const double sigma : {1.0, 1e2, 1e4, 1e6}) {
    const Matrix m = steady_lower_bound(example2_model(), scalar_scheme(sigma));
    const double oracle =
        oracle_scalar_steady_lower_bound(1.1, 1.0, 2.5, 1.0, sigma);
    EXPECT_NEAR(m(0, 0), oracle, 1e-8 * (1.0 + oracle));
    EXPECT_GT(m(0, 0), previous);
    previous = m(0, 0);
  }
}

TEST(SteadyLowerBound, BelowSteadyDeviationOnExample1) {
  const SystemModel model = example1_model();
  const PrivacyScheme scheme{100.0 * Matrix::Identity(2, 2)};
  const auto filt = steady_kalman(model);
  const Matrix q_privacy = steady_deviation(filt.F, filt.K_at(1), scheme);
  const Matrix bound = steady_lower_bound(model, scheme);
  EXPECT_GE(min_symmetric_eigenvalue(q_privacy - bound), -1e-9);
}

TEST(AnalyzeDeviation, AverageStopsBeforeFinalStep) {
  const SystemModel model = example2_model();
  const auto filt = covariance_recursion(model, 4);
  const auto analysis = analyze_deviation(model, scalar_scheme(1.0), filt, 4);
  Matrix expected = Matrix::Zero(1, 1);
  for (int k = 0; k < 4; ++k) expected += analysis.Qk[k];
  expected /= 4.0;
  EXPECT_LE(max_abs(analysis.Q_avg - expected), 1e-14);
  EXPECT_EQ(analysis.Qk.size(), 5u);
  EXPECT_EQ(analysis.Mk.size(), 5u);
  EXPECT_EQ(analysis.P_pub_real.size(), 5u);
}

}  // namespace
}  // namespace lqgpriv
