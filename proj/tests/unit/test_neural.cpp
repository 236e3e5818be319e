#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "chaosode/neural.hpp"

namespace chaosode {
namespace {

TEST(MlpParamCount, HandArithmetic) {
  EXPECT_EQ(mlp_param_count(MlpSpec{{2, 32, 32, 2}}), 1218u);
  EXPECT_EQ(mlp_param_count(MlpSpec{{1, 1, 1}}), 4u);
  EXPECT_THROW(mlp_param_count(MlpSpec{{2, 2}}), std::invalid_argument);
  EXPECT_THROW(mlp_param_count(MlpSpec{{2, 8, 3}}), std::invalid_argument);
}

TEST(MlpRhs, ScalarClosedForm) {
  MlpRhs net(MlpSpec{{1, 1, 1}});
  const std::vector<double> params{1.0, 0.0, 1.0, 0.0};
  EXPECT_NEAR(net(params, std::vector<double>{0.5})[0], std::tanh(0.5), 1e-16);
  EXPECT_NEAR(net(params, std::vector<double>{0.5})[0], 0.46212, 1e-5);
}

TEST(MlpRhs, OutputLayerIsLinear) {
  MlpRhs net(MlpSpec{{1, 1, 1}});
  const std::vector<double> params{0.0, 0.0, 3.0, -2.0};  // hidden = tanh(0) = 0
  EXPECT_EQ(net(params, std::vector<double>{9.0})[0], -2.0);
}

TEST(MlpInit, DeterministicUnderSeed) {
  const MlpSpec spec;
  EXPECT_EQ(mlp_init(spec, 42), mlp_init(spec, 42));
  EXPECT_NE(mlp_init(spec, 42), mlp_init(spec, 43));
}

TEST(MlpInit, GlorotSpreadAndZeroBiases) {
  const MlpSpec spec;
  const auto params = mlp_init(spec, 7);
  ASSERT_EQ(params.size(), 1218u);
  std::size_t off = 0;
  const auto& w = spec.layer_widths;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const std::size_t count = w[l] * w[l + 1];
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      sum += params[off + i];
      sq += params[off + i] * params[off + i];
    }
    const double mean = sum / static_cast<double>(count);
    const double sd = std::sqrt(sq / static_cast<double>(count) - mean * mean);
    const double target = std::sqrt(2.0 / static_cast<double>(w[l] + w[l + 1]));
    EXPECT_NEAR(sd, target, 0.2 * target) << "layer " << l;
    for (std::size_t i = 0; i < w[l + 1]; ++i) EXPECT_EQ(params[off + count + i], 0.0);
    off += count + w[l + 1];
  }
}

TEST(MlpRhs, DualJacobianMatchesFiniteDifferences) {
  MlpRhs net(MlpSpec{});
  auto params = mlp_init(net.spec(), 3);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 0.1);
  for (double& p : params) p += normal(rng);
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<double> x{1.0 + normal(rng) * 10, 2.0 + normal(rng) * 10};
    const std::vector<Dual8> dx{Dual8::variable(x[0], 0), Dual8::variable(x[1], 1)};
    std::vector<Dual8> out(2);
    net.eval(std::span<const double>(params), std::span<const Dual8>(dx), std::span<Dual8>(out));
    const auto plain = net(params, x);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(out[i].v, plain[i]);
    for (std::size_t j = 0; j < 2; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
      auto xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const auto fp = net(params, xp), fm = net(params, xm);
      for (std::size_t i = 0; i < 2; ++i) {
        const double fd = (fp[i] - fm[i]) / (2 * h);
        EXPECT_NEAR(out[i].d[j], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(MlpRhs, VjpMatchesFiniteDifferences) {
  MlpRhs net(MlpSpec{{2, 5, 4, 2}});
  auto params = mlp_init(net.spec(), 5);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (double& p : params) p += normal(rng);
  const std::vector<double> x{0.4, -1.1}, w{0.7, -0.2};
  std::vector<double> gx(2), gp(params.size(), 0.0);
  net.vjp(params, x, w, gx, gp);
  auto dot = [&](const std::vector<double>& p, const std::vector<double>& xx) {
    const auto f = net(p, xx);
    return w[0] * f[0] + w[1] * f[1];
  };
  const double h = 1e-6;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto pp = params, pm = params;
    pp[k] += h;
    pm[k] -= h;
    EXPECT_NEAR(gp[k], (dot(pp, x) - dot(pm, x)) / (2 * h), 1e-8) << k;
  }
  for (std::size_t j = 0; j < 2; ++j) {
    auto xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    EXPECT_NEAR(gx[j], (dot(params, xp) - dot(params, xm)) / (2 * h), 1e-8);
  }
}

TEST(MlpRhs, JsonRoundTrip) {
  auto net = std::make_shared<MlpRhs>(MlpSpec{{2, 6, 2}});
  const auto back = load_rhs(nlohmann::json::parse(net->to_json().dump()));
  ASSERT_EQ(back->kind(), RhsKind::neural);
  ASSERT_EQ(back->param_count(), net->param_count());
  const auto params = mlp_init(net->spec(), 1);
  const std::vector<double> x{0.3, 0.9};
  EXPECT_EQ((*back)(params, x), (*net)(params, x));
}

}  // namespace
}  // namespace chaosode
