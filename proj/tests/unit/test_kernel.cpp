#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "chaosode/errors.hpp"
#include "chaosode/kernel.hpp"
#include "test_support.hpp"

namespace chaosode {
namespace {

using testing::linspace;

Eigen::MatrixXd random_separated_points(std::mt19937_64& rng, std::size_t count, double min_dist) {
  std::uniform_real_distribution<double> uni(0.0, 10.0);
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(count), 2);
  Eigen::Index filled = 0;
  while (filled < pts.rows()) {
    const Eigen::RowVector2d cand(uni(rng), uni(rng));
    bool ok = true;
    for (Eigen::Index i = 0; i < filled; ++i) ok = ok && (pts.row(i) - cand).norm() >= min_dist;
    if (ok) pts.row(filled++) = cand;
  }
  return pts;
}

TEST(KernelEval, ClosedForm) {
  const KernelSpec spec{0.7, 0.0};
  const std::vector<double> a{1.0, 2.0};
  EXPECT_EQ(kernel_eval(spec, a, a), 1.0);
  const std::vector<double> b{1.0, 2.0 + 0.7 * std::sqrt(2.0)};
  EXPECT_NEAR(kernel_eval(spec, a, b), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(kernel_eval(spec, a, b), 0.36788, 1e-5);
}

TEST(KernelEval, SymmetricAndMonotoneInLengthscale) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 200; ++k) {
    const std::vector<double> a{normal(rng), normal(rng)}, b{normal(rng), normal(rng)};
    const KernelSpec spec{0.5 + std::abs(normal(rng)), 0.0};
    EXPECT_EQ(kernel_eval(spec, a, b), kernel_eval(spec, b, a));
  }
  const std::vector<double> a{0.0, 0.0}, b{1.0, 1.0};
  double prev = 0.0;
  for (double l = 0.1; l < 1e4; l *= 2.0) {
    const double k = kernel_eval(KernelSpec{l, 0.0}, a, b);
    EXPECT_GE(k, prev);
    prev = k;
  }
  EXPECT_GT(prev, 1.0 - 1e-6);
}

TEST(FitCoefficients, ScalarSolve) {
  Eigen::MatrixXd pilots(1, 1);
  pilots << 0.0;
  KernelRhs rhs(KernelSpec{1.0, 0.0}, pilots);
  Eigen::MatrixXd theta(1, 1);
  theta << 2.0;
  EXPECT_NEAR(rhs.fit_coefficients(theta)(0, 0), 2.0, 1e-15);
}

TEST(FitCoefficients, TwoByTwoByHand) {
  // k(x1, x2) = 0.5 needs |x1 - x2|^2 = 2 l^2 ln 2.
  const double l = 1.0;
  Eigen::MatrixXd pilots(2, 1);
  pilots << 0.0, std::sqrt(2.0 * std::log(2.0)) * l;
  KernelRhs rhs(KernelSpec{l, 0.0}, pilots);
  EXPECT_NEAR(rhs.system_matrix()(0, 1), 0.5, 1e-15);
  Eigen::MatrixXd theta(2, 1);
  theta << 1.0, 1.0;
  const auto c = rhs.fit_coefficients(theta);
  EXPECT_NEAR(c(0, 0), 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(c(1, 0), 2.0 / 3.0, 1e-14);
}

TEST(FitCoefficients, CoincidentPilotsFail) {
  Eigen::MatrixXd pilots(3, 2);
  pilots << 0.0, 0.0, 1.0, 1.0, 0.0, 0.0;
  EXPECT_THROW(KernelRhs(KernelSpec{1.0, 0.0}, pilots), FactorizationFailed);
}

TEST(FitCoefficients, RidgeShrinksMonotonically) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const auto pilots = random_separated_points(rng, 15, 0.5);
    Eigen::MatrixXd theta(15, 2);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = normal(rng);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {1e-6, 1e-3, 1e-1, 1.0, 10.0, 1e3, 1e6}) {
      const double norm = KernelRhs(KernelSpec{1.5, lambda}, pilots).fit_coefficients(theta).norm();
      EXPECT_LE(norm, prev * (1.0 + 1e-12));
      prev = norm;
    }
    EXPECT_LT(prev, 1e-4 * theta.norm());
  }
}

TEST(KernelRhs, ZeroPilotValuesGiveZeroField) {
  std::mt19937_64 rng(1);
  KernelRhs rhs(KernelSpec{1.0, 1e-8}, random_separated_points(rng, 10, 0.5));
  const std::vector<double> params(rhs.param_count(), 0.0);
  const auto f = rhs(params, std::vector<double>{3.0, 4.0});
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[1], 0.0);
}

TEST(KernelRhs, InterpolatesAtPilotsWithoutRidge) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> count(2, 50);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t p = count(rng);
    const auto pilots = random_separated_points(rng, p, 1.0);
    KernelRhs rhs(KernelSpec{0.8, 0.0}, pilots);
    std::vector<double> params(rhs.param_count());
    for (double& v : params) v = normal(rng);
    double worst = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const std::vector<double> x{pilots(static_cast<Eigen::Index>(j), 0), pilots(static_cast<Eigen::Index>(j), 1)};
      const auto f = rhs(params, x);
      for (std::size_t d = 0; d < 2; ++d) worst = std::max(worst, std::abs(f[d] - params[j * 2 + d]));
    }
    EXPECT_LT(worst, 1e-8) << "P=" << p;
  }
}

TEST(KernelRhs, DecaysAwayFromPilots) {
  std::mt19937_64 rng(3);
  KernelRhs rhs(KernelSpec{1.0, 1e-8}, random_separated_points(rng, 12, 0.8));
  std::vector<double> params(rhs.param_count(), 1.0);
  const auto coeffs = rhs.coefficients(params);
  double c_l1 = 0.0;
  for (double c : coeffs) c_l1 += std::abs(c);
  double prev = std::numeric_limits<double>::infinity();
  for (double r : {15.0, 20.0, 30.0, 60.0}) {
    const std::vector<double> x{5.0 + r, 5.0};
    double kmax = 0.0;
    for (Eigen::Index i = 0; i < rhs.pilots().rows(); ++i) {
      const std::vector<double> p{rhs.pilots()(i, 0), rhs.pilots()(i, 1)};
      kmax = std::max(kmax, kernel_eval(rhs.spec(), x, p));
    }
    const auto f = rhs(params, x);
    const double mag = std::max(std::abs(f[0]), std::abs(f[1]));
    EXPECT_LE(mag, c_l1 * kmax + 1e-300);
    EXPECT_LE(mag, prev);
    prev = mag;
  }
  EXPECT_LT(prev, 1e-100);
}

TEST(KernelRhs, DualCoefficientsCarryTangents) {
  std::mt19937_64 rng(4);
  KernelRhs rhs(KernelSpec{1.2, 1e-6}, random_separated_points(rng, 6, 1.0));
  std::vector<double> params(rhs.param_count());
  std::normal_distribution<double> normal;
  for (double& v : params) v = normal(rng);
  std::vector<Dual8> dual_params(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) dual_params[i] = i < 8 ? Dual8::variable(params[i], i) : Dual8(params[i]);
  std::vector<Dual8> dual_coeffs(rhs.coeff_count());
  rhs.coefficients(std::span<const Dual8>(dual_params), std::span<Dual8>(dual_coeffs));
  const auto coeffs = rhs.coefficients(params);
  for (std::size_t i = 0; i < coeffs.size(); ++i) EXPECT_NEAR(dual_coeffs[i].v, coeffs[i], 1e-12);
  // Tangent of c with respect to theta_k equals the k-th column of the inverse (per output dim).
  std::vector<double> bumped = params;
  const double h = 1e-6;
  bumped[3] += h;
  const auto cb = rhs.coefficients(bumped);
  for (std::size_t i = 0; i < coeffs.size(); ++i) EXPECT_NEAR(dual_coeffs[i].d[3], (cb[i] - coeffs[i]) / h, 1e-4);
}

TEST(Pilots, GridOverInflatedBox) {
  Eigen::MatrixXd states(3, 2);
  states << 0.0, 1.0, 10.0, 3.0, 5.0, 2.0;
  const auto pilots = grid_pilots(states, 5, 0.1);
  ASSERT_EQ(pilots.rows(), 25);
  EXPECT_NEAR(pilots.col(0).minCoeff(), -1.0, 1e-12);
  EXPECT_NEAR(pilots.col(0).maxCoeff(), 11.0, 1e-12);
  EXPECT_NEAR(pilots.col(1).minCoeff(), 0.8, 1e-12);
  EXPECT_NEAR(pilots.col(1).maxCoeff(), 3.2, 1e-12);
}

TEST(Pilots, MedianPairwiseDistance) {
  Eigen::MatrixXd pts(3, 1);
  pts << 0.0, 1.0, 3.0;
  EXPECT_DOUBLE_EQ(median_pairwise_distance(pts), 2.0);
}

TEST(TimeSurrogate, LinearDataDerivative) {
  const auto times = linspace(0.0, 5.0, 20);
  Eigen::MatrixXd states(20, 1);
  for (int i = 0; i < 20; ++i) states(i, 0) = 2.0 * times[static_cast<std::size_t>(i)];
  const auto s = fit_time_surrogate(times, states, KernelSpec{5.0 / 4.0, 1e-8});
  for (double t = 0.5; t <= 4.5; t += 0.05) EXPECT_NEAR(surrogate_derivative(s, t)[0], 2.0, 0.05) << t;
}

TEST(TimeSurrogate, ConstantDataDerivative) {
  const auto times = linspace(0.0, 3.0, 15);
  Eigen::MatrixXd states = Eigen::MatrixXd::Constant(15, 2, 4.2);
  const auto s = fit_time_surrogate(times, states, KernelSpec{0.75, 1e-6});
  for (double t = 0.3; t <= 2.7; t += 0.1) {
    const auto d = s.derivative(t);
    EXPECT_NEAR(d[0], 0.0, 1e-6);
    EXPECT_NEAR(d[1], 0.0, 1e-6);
    EXPECT_NEAR(s.value(t)[0], 4.2, 1e-6);
  }
}

TEST(TimeSurrogate, SineDataDerivative) {
  const double span = 2.0 * std::numbers::pi;
  const auto times = linspace(0.0, span, 100);
  Eigen::MatrixXd states(100, 1);
  for (int i = 0; i < 100; ++i) states(i, 0) = std::sin(times[static_cast<std::size_t>(i)]);
  const auto s = fit_time_surrogate(times, states, KernelSpec{0.5, 1e-6});
  for (double t = 0.1 * span; t <= 0.9 * span; t += 0.05) EXPECT_NEAR(s.derivative(t)[0], std::cos(t), 0.05) << t;
}

TEST(TimeSurrogate, DerivativeMatchesFiniteDifferenceOfValue) {
  const auto times = linspace(0.0, 4.0, 30);
  Eigen::MatrixXd states(30, 2);
  for (int i = 0; i < 30; ++i) {
    const double t = times[static_cast<std::size_t>(i)];
    states.row(i) << std::exp(-t), t * t;
  }
  const auto s = fit_time_surrogate(times, states, KernelSpec{0.6, 1e-6});
  const double h = 1e-6;
  for (double t = 0.2; t < 3.8; t += 0.3) {
    const auto d = s.derivative(t);
    const auto vp = s.value(t + h), vm = s.value(t - h);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(d[static_cast<std::size_t>(k)], (vp[static_cast<std::size_t>(k)] - vm[static_cast<std::size_t>(k)]) / (2 * h), 1e-5);
  }
}

TEST(KernelRhs, JsonRoundTrip) {
  std::mt19937_64 rng(6);
  auto rhs = std::make_shared<KernelRhs>(KernelSpec{1.1, 1e-7}, random_separated_points(rng, 9, 0.5));
  const auto back = load_rhs(nlohmann::json::parse(rhs->to_json().dump()));
  ASSERT_EQ(back->kind(), RhsKind::kernel);
  std::vector<double> params(rhs->param_count(), 0.3);
  const std::vector<double> x{2.0, 7.0};
  EXPECT_EQ((*back)(params, x), (*rhs)(params, x));
}

}  // namespace
}  // namespace chaosode
