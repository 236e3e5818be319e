#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "chaosode/apce.hpp"
#include "chaosode/bench.hpp"
#include "chaosode/errors.hpp"
#include "test_support.hpp"

namespace chaosode {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(LotkaVolterra, FixedPoints) {
  std::vector<double> dx(2);
  lv_rhs<double>(std::vector<double>{0.0, 0.0}, dx);
  EXPECT_EQ(dx[0], 0.0);
  EXPECT_EQ(dx[1], 0.0);
  // Coexistence point (delta/gamma, alpha/beta).
  lv_rhs<double>(std::vector<double>{3.0, 1.5}, dx);
  EXPECT_EQ(dx[0], 0.0);
  EXPECT_EQ(dx[1], 0.0);
}

TEST(LotkaVolterra, ConservesFirstIntegral) {
  // V = gamma x - delta ln x + beta y - alpha ln y is constant along orbits.
  const auto data = generate_data(50, 0.0, 0, {1.0, 1.0}, {0.0, 14.0});
  const auto v = [](double x, double y) { return x - 3.0 * std::log(x) + y - 1.5 * std::log(y); };
  const double v0 = v(1.0, 1.0);
  for (Eigen::Index i = 0; i < data.states.rows(); ++i)
    EXPECT_NEAR(v(data.states(i, 0), data.states(i, 1)), v0, 1e-9);
}

TEST(GenerateData, ShapeAndGrid) {
  const auto d = generate_data(35, 0.0, 0);
  ASSERT_EQ(d.times.size(), 35u);
  EXPECT_EQ(d.states.rows(), 35);
  EXPECT_EQ(d.times.front(), 0.0);
  EXPECT_EQ(d.times.back(), 7.0);
  EXPECT_EQ(d.states(0, 0), 1.0);
  EXPECT_EQ(d.states(0, 1), 1.0);
  for (std::size_t i = 1; i < d.times.size(); ++i) EXPECT_NEAR(d.times[i] - d.times[i - 1], 7.0 / 34.0, 1e-14);
}

TEST(GenerateData, NoiseIsSeededAndScaled) {
  const auto clean = generate_data(500, 0.0, 0);
  const auto a = generate_data(500, 0.1, 7);
  const auto b = generate_data(500, 0.1, 7);
  const auto c = generate_data(500, 0.1, 8);
  EXPECT_EQ(a.states, b.states);
  EXPECT_NE(a.states, c.states);
  const Eigen::MatrixXd e = a.states - clean.states;
  const double mean = e.mean();
  const double sd = std::sqrt((e.array() - mean).square().sum() / static_cast<double>(e.size() - 1));
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(sd, 0.1, 0.01);
}

TEST(GenerateData, RejectsBadArguments) {
  EXPECT_THROW(generate_data(1, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(generate_data(10, -1.0, 0), std::invalid_argument);
}

TEST(Evaluate, TrueModelScoresZero) {
  // Monomial chaos with the exact LV coefficients is the true field.
  const auto rhs = testing::monomial_rhs(2, 2);
  const auto theta = testing::lv_monomial_params();
  for (const auto& s : eval_setups()) EXPECT_LE(evaluate(*rhs, theta, s, 200, StepPolicy{0, 1e-4}), 1e-8);
}

TEST(Evaluate, DivergentModelScoresInfinity) {
  const auto rhs = testing::monomial_rhs(2, 2);
  std::vector<double> theta(12, 0.0);
  theta[3] = 10.0;
  EXPECT_EQ(evaluate(*rhs, theta, eval_setup(SetupName::ex_it)), kInf);
}

TEST(Setups, Definitions) {
  EXPECT_EQ(eval_setup(SetupName::ex_it).t_end, 7.0);
  EXPECT_EQ(eval_setup(SetupName::ex_oot).t_end, 14.0);
  EXPECT_EQ(eval_setup(SetupName::ex_ood).x0, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(setup_from_string("ex-ood"), SetupName::ex_ood);
  EXPECT_THROW(setup_from_string("ex_xx"), std::invalid_argument);
}

TEST(Success, ThresholdIsInclusive) {
  EXPECT_TRUE(is_success(10.0));
  EXPECT_FALSE(is_success(10.000001));
  EXPECT_FALSE(is_success(kInf));
  EXPECT_FALSE(is_success(std::numeric_limits<double>::quiet_NaN()));
}

ScenarioRecord make_record(std::string method, std::size_t n, double it, double ood, std::uint64_t seed = 0) {
  ScenarioRecord r;
  r.scenario = "S2";
  r.method = std::move(method);
  r.n_train = n;
  r.seed = seed;
  r.mse_ex_it = it;
  r.mse_ex_oot = it;
  r.mse_ex_ood = ood;
  r.final_loss = it;
  r.gram_condition = std::numeric_limits<double>::quiet_NaN();
  r.config = nlohmann::json::object();
  return r;
}

TEST(Records, JsonRoundTripKeepsInfinities) {
  auto r = make_record("kernel", 35, 1e-3, kInf);
  r.status = "failed";
  r.message = "diverged";
  const auto back = record_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.mse_ex_it, 1e-3);
  EXPECT_EQ(back.mse_ex_ood, kInf);
  EXPECT_TRUE(std::isnan(back.gram_condition));
  EXPECT_EQ(back.cell_key(), r.cell_key());
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
}

TEST(Records, SuccessFlagsMatchMse) {
  const auto j = to_json(make_record("chaos", 10, 5.0, 50.0));
  EXPECT_TRUE(j.at("success_ex_it").get<bool>());
  EXPECT_FALSE(j.at("success_ex_ood").get<bool>());
  auto tampered = j;
  tampered["success_ex_ood"] = true;
  EXPECT_THROW(record_from_json(tampered), std::invalid_argument);
}

TEST(Records, CsvRowMatchesHeader) {
  const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  const auto row = to_csv_row(make_record("neural", 100, 0.5, kInf));
  EXPECT_EQ(count(row), count(csv_header()));
  EXPECT_NE(row.find("inf"), std::string::npos);
}

TEST(Median, OddEvenAndEmpty) {
  EXPECT_EQ(median({1.0, 2.0, 100.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_EQ(median({1.0, kInf}), kInf);
  EXPECT_THROW(median({}), EmptyGroup);
}

TEST(Aggregate, GroupsAndReduces) {
  std::vector<ScenarioRecord> rs;
  for (double v : {1.0, 2.0, 100.0}) rs.push_back(make_record("chaos", 10, v, v));
  rs.push_back(make_record("chaos", 100, 0.5, 0.5));
  rs.push_back(make_record("kernel", 10, 20.0, 20.0));
  const auto med = aggregate(rs, {"method", "n_train"}, "mse_ex_it", Statistic::median);
  ASSERT_EQ(med.size(), 3u);
  // Numeric order: 10 before 100.
  EXPECT_EQ(med[0].group, (std::vector<std::string>{"chaos", "10"}));
  EXPECT_EQ(med[0].value, 2.0);
  EXPECT_EQ(med[0].count, 3u);
  EXPECT_EQ(med[1].group[1], "100");
  const auto best = aggregate(rs, {"method"}, "mse_ex_it", Statistic::min);
  EXPECT_EQ(best[0].value, 0.5);
  const auto rate = aggregate(rs, {"method"}, "ex_it", Statistic::success_rate);
  EXPECT_DOUBLE_EQ(rate[0].value, 0.75);
  EXPECT_EQ(rate[1].value, 0.0);
  EXPECT_THROW(aggregate({}, {"method"}, "mse_ex_it", Statistic::median), EmptyGroup);
  EXPECT_THROW(aggregate(rs, {"colour"}, "mse_ex_it", Statistic::median), std::invalid_argument);
}

TEST(Figures, CsvForPresentScenariosOnly) {
  std::vector<ScenarioRecord> rs{make_record("chaos", 10, 1.0, 2.0), make_record("kernel", 10, 3.0, 4.0)};
  const auto csv = figure_csv(rs, "s2_ex_ood");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,group,value");
  EXPECT_NE(csv.find("10,chaos,2\n"), std::string::npos);
  EXPECT_NE(csv.find("10,kernel_best,4\n"), std::string::npos);
  EXPECT_THROW(figure_csv(rs, "s3_success"), EmptyGroup);
  EXPECT_THROW(figure_csv(rs, "nope"), std::invalid_argument);
}

TEST(Cells, DefaultCounts) {
  ScenarioConfig s;
  s.id = "S1";
  EXPECT_EQ(scenario_cells(s).size(), 3u);
  s.id = "S2";
  EXPECT_EQ(scenario_cells(s).size(), 3u * 7u * 10u);
  s.id = "S3";
  EXPECT_EQ(scenario_cells(s).size(), 3u * 4u * 5u * 10u);
  s.id = "S4";
  const auto s4 = scenario_cells(s);
  EXPECT_EQ(s4.size(), 2u * 4u * 5u * 10u);
  for (const auto& c : s4) EXPECT_EQ(c.method, "chaos");
  s.id = "S5";
  EXPECT_THROW(scenario_cells(s), std::invalid_argument);
}

TEST(Cells, KeysAreUniqueAndOffsetSeeds) {
  ScenarioConfig s;
  s.id = "S3";
  s.n_grid = {10};
  s.sigma_grid = {0.0, 0.01};
  s.seeds = 3;
  s.seed_offset = 100;
  const auto cells = scenario_cells(s);
  std::set<std::string> keys;
  for (const auto& c : cells) {
    keys.insert(c.key());
    EXPECT_GE(c.seed, 100u);
  }
  EXPECT_EQ(keys.size(), cells.size());
}

TEST(RunScenario, SkipsDoneCellsAndRecordsFailures) {
  ScenarioConfig s;
  s.id = "S2";
  s.methods = {"chaos"};
  s.n_grid = {3, 20};
  s.seeds = 1;
  PipelineConfig base;
  base.run_pso = base.run_cmaes = base.run_qn_multiple = base.run_qn_single = false;
  const auto cells = scenario_cells(s);
  std::size_t sunk = 0;
  const auto recs = run_scenario(s, base, {cells[1].key()}, [&](const ScenarioRecord&) { ++sunk; });
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(sunk, 1u);
  EXPECT_EQ(recs[0].cell_key(), cells[0].key());
  // Three points cannot support a cubic basis in two variables.
  EXPECT_EQ(recs[0].status, "failed");
  EXPECT_FALSE(recs[0].message.empty());
  EXPECT_EQ(recs[0].mse_ex_it, kInf);
  EXPECT_EQ(recs[0].config.at("model").at("kind"), "chaos");
}

TEST(RunCell, S4RecordsGramCondition) {
  ScenarioConfig s;
  PipelineConfig base;
  base.run_pso = base.run_cmaes = base.run_qn_multiple = base.run_qn_single = false;
  const auto ortho = run_cell(Cell{"S4", "chaos", "orthonormal", 35, 0.0, 0}, s, base);
  const auto mono = run_cell(Cell{"S4", "chaos", "monomial", 35, 0.0, 0}, s, base);
  ASSERT_EQ(ortho.status, "ok") << ortho.message;
  EXPECT_TRUE(std::isfinite(ortho.gram_condition));
  EXPECT_GE(mono.gram_condition, 1e2 * ortho.gram_condition);
  EXPECT_EQ(ortho.config.at("model").at("basis_variant"), "orthonormal");
}

}  // namespace
}  // namespace chaosode
