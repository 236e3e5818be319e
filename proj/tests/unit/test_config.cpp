#include <cstdio>
#include <fstream>

#include <gtest/gtest.h>

#include "chaosode/config.hpp"
#include "chaosode/errors.hpp"

namespace chaosode {
namespace {

using nlohmann::json;

TEST(RunConfig, EmptyDocumentGivesDefaults) {
  const auto c = run_config_from_json(json::object());
  EXPECT_EQ(to_json(c).dump(), to_json(RunConfig{}).dump());
  EXPECT_EQ(c.pipeline.model.kind, RhsKind::chaos);
  EXPECT_EQ(c.pipeline.segment_size, 8u);
  EXPECT_EQ(c.scenario.id, "S1");
}

TEST(RunConfig, RoundTripOfEveryField) {
  RunConfig c;
  c.data.n = 100;
  c.data.sigma = 0.01;
  c.data.seed = 9;
  c.data.x0 = {0.5, 0.5};
  c.pipeline.model.kind = RhsKind::kernel;
  c.pipeline.model.pilots_per_dim = 6;
  c.pipeline.model.widths = {2, 16, 2};
  c.pipeline.init.surrogate_spacing_factor = 3.0;
  c.pipeline.run_cmaes = false;
  c.pipeline.pso.swarm = 12;
  c.pipeline.cmaes.sigma0 = 0.7;
  c.pipeline.qn_single.max_iters = 17;
  c.pipeline.step = StepPolicy{4, 0.005};
  c.pipeline.seed = 123;
  c.scenario.id = "S3";
  c.scenario.n_grid = {10, 100};
  c.scenario.sigma_grid = {0.0, 0.01};
  c.scenario.seeds = 5;
  c.output.directory = "results";
  c.output.formats = {"csv"};
  const auto text = to_json(c).dump();
  const auto back = run_config_from_json(json::parse(text));
  EXPECT_EQ(to_json(back).dump(), text);
  EXPECT_FALSE(back.pipeline.run_cmaes);
  EXPECT_EQ(back.pipeline.qn_single.max_iters, 17u);
}

TEST(RunConfig, PartialOverlayKeepsOtherDefaults) {
  const auto c = run_config_from_json(json::parse(R"({"pipeline": {"stages": {"pso": {"iters": 5}}}})"));
  EXPECT_EQ(c.pipeline.pso.iters, 5u);
  EXPECT_EQ(c.pipeline.pso.swarm, PsoConfig{}.swarm);
  EXPECT_TRUE(c.pipeline.run_pso);
}

TEST(RunConfig, UnknownKeyIsNamed) {
  try {
    run_config_from_json(json::parse(R"({"pipeline": {"stages": {"cmaes": {"sigma": 1.0}}}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("pipeline.stages.cmaes.sigma"), std::string::npos);
  }
  EXPECT_THROW(run_config_from_json(json::parse(R"({"extra": 1})")), ConfigError);
}

TEST(RunConfig, TypeErrors) {
  EXPECT_THROW(run_config_from_json(json::parse(R"({"data": {"n": "many"}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"data": {"n": 3.5}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"data": {"n": -4}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"model": 3})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"model": {"widths": [2, "x", 2]}})")), ConfigError);
  // Integers are accepted where reals are expected.
  EXPECT_EQ(run_config_from_json(json::parse(R"({"data": {"sigma": 1}})")).data.sigma, 1.0);
}

TEST(RunConfig, ValueErrors) {
  EXPECT_THROW(run_config_from_json(json::parse(R"({"model": {"kind": "spline"}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"scenario": {"id": "S9"}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"scenario": {"methods": ["gp"]}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"output": {"formats": ["xml"]}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"pipeline": {"segment_size": 1}})")), ConfigError);
}

TEST(PipelineEcho, RoundTrip) {
  PipelineConfig p;
  p.model.kind = RhsKind::neural;
  p.continuity_weight = 2.5;
  p.run_qn_multiple = false;
  const auto echo = pipeline_echo(p);
  const auto back = pipeline_from_echo(echo);
  EXPECT_EQ(pipeline_echo(back).dump(), echo.dump());
}

TEST(LoadRunConfig, ReadsFileAndReportsErrors) {
  const std::string path = ::testing::TempDir() + "chaosode_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"data": {"n": 10}})";
  }
  EXPECT_EQ(load_run_config(path).data.n, 10u);
  {
    std::ofstream out(path);
    out << "{not json";
  }
  EXPECT_THROW(load_run_config(path), ConfigError);
  std::remove(path.c_str());
  EXPECT_THROW(load_run_config(path), ConfigError);
}

}  // namespace
}  // namespace chaosode
