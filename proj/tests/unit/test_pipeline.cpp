#include <cmath>

#include <gtest/gtest.h>

#include "chaosode/bench.hpp"
#include "chaosode/errors.hpp"
#include "chaosode/kernel.hpp"
#include "chaosode/loss.hpp"
#include "chaosode/neural.hpp"
#include "chaosode/pipeline.hpp"

namespace chaosode {
namespace {

const std::vector<std::pair<double, double>> kRegion{{0.25, 7.0}, {0.25, 7.0}};

void lv_field(std::span<const double> x, std::span<double> dx) { lv_rhs<double>(x, dx); }

double max_field_error(const RhsModel& rhs, std::span<const double> params, const Eigen::MatrixXd& points) {
  double err = 0.0;
  std::vector<double> x(2), truth(2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    x = {points(i, 0), points(i, 1)};
    lv_rhs<double>(x, truth);
    const auto f = rhs(params, x);
    err = std::max({err, std::abs(f[0] - truth[0]), std::abs(f[1] - truth[1])});
  }
  return err;
}

PipelineConfig small_budget(RhsKind kind) {
  PipelineConfig cfg;
  cfg.model.kind = kind;
  cfg.pso.iters = 30;
  cfg.cmaes.max_evals = 2000;
  cfg.qn_multiple.max_iters = 200;
  cfg.qn_single.max_iters = 200;
  return cfg;
}

TEST(EstimateInitialParams, ChaosReproducesFieldOnTrajectory) {
  const auto data = generate_data(144, 0.0, 0);
  ModelConfig mc;
  mc.kind = RhsKind::chaos;
  const auto rhs = build_rhs(mc, data.states);
  const auto params = estimate_initial_params(data, *rhs, InitConfig{}, 0);
  // Dense points along the training orbit cover its hull.
  std::vector<double> times(1000);
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = 7.0 * static_cast<double>(i) / 999.0;
  const std::vector<double> x0{1.0, 1.0};
  EXPECT_LT(max_field_error(*rhs, params, lv_reference(x0, 0.0, times)), 0.1);
}

TEST(EstimateInitialParams, EquilibriumDataGivesNearZeroField) {
  ObservationSet eq;
  eq.times = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  eq.states = Eigen::MatrixXd(6, 2);
  for (int i = 0; i < 6; ++i) eq.states.row(i) << 3.0, 1.5;
  eq.x0 = {3.0, 1.5};
  const auto lv = generate_data(50, 0.0, 0);
  for (RhsKind kind : {RhsKind::chaos, RhsKind::kernel}) {
    ModelConfig mc;
    mc.kind = kind;
    const auto rhs = build_rhs(mc, lv.states);
    const auto params = estimate_initial_params(eq, *rhs, InitConfig{}, 0);
    const auto f = (*rhs)(params, std::vector<double>{3.0, 1.5});
    EXPECT_LT(std::abs(f[0]) + std::abs(f[1]), 1e-6) << to_string(kind);
  }
}

TEST(EstimateInitialParams, NeuralWarmStartReducesRegressionError) {
  const auto data = generate_data(35, 0.0, 0);
  ModelConfig mc;
  mc.kind = RhsKind::neural;
  const auto rhs = build_rhs(mc, data.states);
  const auto& net = dynamic_cast<const MlpRhs&>(*rhs);
  const Eigen::MatrixXd& x = data.states;
  Eigen::MatrixXd dx(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<double> xi{x(i, 0), x(i, 1)}, d(2);
    lv_rhs<double>(xi, d);
    dx.row(i) << d[0], d[1];
  }
  const auto init = mlp_init(net.spec(), 4);
  const auto fitted = fit_field(*rhs, x, dx, InitConfig{}, 4);
  EXPECT_LT(field_mse(*rhs, fitted, x, dx), field_mse(*rhs, init, x, dx));
}

TEST(Pretrain, ChaosRecoversLotkaVolterraExactly) {
  const Eigen::MatrixXd grid = grid_points(kRegion, 50);
  ModelConfig mc;
  mc.kind = RhsKind::chaos;
  mc.n_max = 2;
  const auto rhs = build_rhs(mc, grid);
  const auto params = pretrain_perfect_information(*rhs, lv_field, kRegion, 50, InitConfig{}, 0);
  EXPECT_LT(max_field_error(*rhs, params, grid), 1e-8);

  mc.basis_variant = BasisVariant::monomial;
  const auto mono = build_rhs(mc, grid);
  const auto theta = pretrain_perfect_information(*mono, lv_field, kRegion, 50, InitConfig{}, 0);
  // Index order 1, x, y, x^2, xy, y^2 per output.
  const std::vector<double> expected{0, 1.5, 0, 0, -1, 0, 0, 0, -3, 0, 1, 0};
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(theta[i], expected[i], 1e-10) << i;
  EXPECT_LT(max_field_error(*mono, theta, grid), 1e-10);
}

TEST(Pretrain, KernelApproximatesFieldOnGrid) {
  const Eigen::MatrixXd grid = grid_points(kRegion, 50);
  ModelConfig mc;
  mc.kind = RhsKind::kernel;
  const auto rhs = build_rhs(mc, grid);
  const auto params = pretrain_perfect_information(*rhs, lv_field, kRegion, 50, InitConfig{}, 0);
  // 25 pilots leave about 0.09 of residual; 36 pilots meet 0.05.
  EXPECT_LT(max_field_error(*rhs, params, grid), 0.1);
  mc.pilots_per_dim = 6;
  const auto finer = build_rhs(mc, grid);
  const auto p6 = pretrain_perfect_information(*finer, lv_field, kRegion, 50, InitConfig{}, 0);
  EXPECT_LT(max_field_error(*finer, p6, grid), 0.05);
}

TEST(Pretrain, ZeroFieldGivesZeroParams) {
  const Eigen::MatrixXd grid = grid_points(kRegion, 10);
  for (RhsKind kind : {RhsKind::chaos, RhsKind::kernel}) {
    ModelConfig mc;
    mc.kind = kind;
    const auto rhs = build_rhs(mc, grid);
    const auto params = pretrain_perfect_information(
        *rhs, [](std::span<const double>, std::span<double> dx) { dx[0] = dx[1] = 0.0; }, kRegion, 10, InitConfig{}, 0);
    for (double p : params) EXPECT_EQ(p, 0.0);
  }
}

TEST(Train, ChaosNoiseFreeRecoversDynamics) {
  const auto data = generate_data(35, 0.0, 0);
  const auto cfg = small_budget(RhsKind::chaos);
  const auto model = train(data, cfg);
  ASSERT_EQ(model.stages.size(), 5u);
  const std::vector<std::string> names{"init", "pso_single", "cmaes_multiple", "qn_multiple", "qn_single"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(model.stages[i].name, names[i]);
    EXPECT_EQ(model.stages[i].status, "ok");
    EXPECT_LE(model.stages[i].end_loss, model.stages[i].start_loss);
  }
  EXPECT_LE(evaluate(model, eval_setup(SetupName::ex_it)), 1e-4);

  LossSpec spec;
  const ShootingLoss single(model.rhs, data, spec);
  EXPECT_EQ(single.value(model.params), model.final_loss);
}

TEST(Train, DeterministicAndSerializable) {
  const auto data = generate_data(20, 0.01, 3);
  auto cfg = small_budget(RhsKind::kernel);
  cfg.seed = 11;
  cfg.pso.iters = 5;
  cfg.cmaes.max_evals = 200;
  cfg.qn_multiple.max_iters = 20;
  cfg.qn_single.max_iters = 20;
  const auto a = train(data, cfg);
  const auto b = train(data, cfg);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());

  const auto back = trained_model_from_json(nlohmann::json::parse(to_json(a).dump()));
  EXPECT_EQ(back.params, a.params);
  const ShootingLoss single(back.rhs, data, LossSpec{});
  EXPECT_NEAR(single.value(back.params), a.final_loss, 1e-12 * std::abs(a.final_loss));
  EXPECT_EQ(to_json(back).dump(), to_json(a).dump());
}

TEST(Train, ZeroFieldDataGivesZeroLoss) {
  ObservationSet data;
  data.times = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0};
  data.states = Eigen::MatrixXd(8, 2);
  for (int i = 0; i < 8; ++i) data.states.row(i) << 2.0, 1.0;
  data.x0 = {2.0, 1.0};
  // The basis and pilots need a non-degenerate build sample.
  const auto lv = generate_data(50, 0.0, 0);
  for (RhsKind kind : {RhsKind::chaos, RhsKind::kernel}) {
    auto cfg = small_budget(kind);
    const auto rhs = build_rhs(cfg.model, lv.states);
    const auto init = estimate_initial_params(data, *rhs, cfg.init, 0);
    const auto model = train_from(data, rhs, init, cfg);
    EXPECT_LT(model.final_loss, 1e-10) << to_string(kind);
    const auto f = (*rhs)(model.params, std::vector<double>{2.0, 1.0});
    EXPECT_LT(std::abs(f[0]) + std::abs(f[1]), 1e-4) << to_string(kind);
  }
}

TEST(Train, DisabledStagesPassParamsThrough) {
  const auto data = generate_data(20, 0.0, 0);
  auto cfg = small_budget(RhsKind::chaos);
  cfg.run_pso = cfg.run_cmaes = cfg.run_qn_multiple = cfg.run_qn_single = false;
  const auto rhs = build_rhs(cfg.model, data.states);
  const auto init = estimate_initial_params(data, *rhs, cfg.init, 0);
  const auto model = train_from(data, rhs, init, cfg);
  EXPECT_EQ(model.params, init);
  for (std::size_t i = 1; i < model.stages.size(); ++i) EXPECT_EQ(model.stages[i].status, "disabled");
}

TEST(Train, NoFeasibleStageThrows) {
  const auto data = generate_data(20, 0.0, 0);
  auto cfg = small_budget(RhsKind::chaos);
  cfg.model.basis_variant = BasisVariant::monomial;
  cfg.model.n_max = 2;
  cfg.run_pso = cfg.run_cmaes = false;
  const auto rhs = build_rhs(cfg.model, data.states);
  std::vector<double> blowup(rhs->param_count(), 0.0);
  blowup[3] = 50.0;  // x' = 50 x^2
  EXPECT_THROW(train_from(data, rhs, blowup, cfg), AllStagesFailed);
}

TEST(Train, RecoversFromInfeasibleStart) {
  const auto data = generate_data(20, 0.0, 0);
  auto cfg = small_budget(RhsKind::chaos);
  cfg.model.basis_variant = BasisVariant::monomial;
  cfg.model.n_max = 2;
  cfg.segment_size = 3;
  cfg.run_pso = false;
  const auto rhs = build_rhs(cfg.model, data.states);
  // x' = 0.2 x^2 blows up over the full span but not over short segments.
  std::vector<double> start(rhs->param_count(), 0.0);
  start[3] = 0.2;
  const auto model = train_from(data, rhs, start, cfg);
  EXPECT_EQ(model.stages[0].single_loss, cfg.penalty);
  EXPECT_EQ(model.stages[1].status, "disabled");
  EXPECT_LT(model.stages[2].end_loss, model.stages[2].start_loss);
  EXPECT_LT(model.final_loss, 1.0);
}

TEST(DeriveSeed, StreamsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(PipelineConfig, ValidateRejectsBadValues) {
  PipelineConfig cfg;
  cfg.segment_size = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = PipelineConfig{};
  cfg.model.kind = RhsKind::neural;
  cfg.model.widths = {2, 2};
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace chaosode
