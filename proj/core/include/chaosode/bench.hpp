#pragma once

/// \file bench.hpp
/// Lotka-Volterra benchmark: data generation, the three evaluation setups,
/// scenario sweeps S1-S4, result records and aggregation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chaosode/integrate.hpp"
#include "chaosode/observations.hpp"
#include "chaosode/pipeline.hpp"

namespace chaosode {

struct LvConstants {
  double alpha = 1.5;
  double beta = 1.0;
  double gamma = 1.0;
  double delta = 3.0;
};

/// (alpha x - beta x y, gamma x y - delta y).
template <class S>
void lv_rhs(std::span<const S> x, std::span<S> dx, const LvConstants& c = {}) {
  const S xy = x[0] * x[1];
  dx[0] = c.alpha * x[0] - c.beta * xy;
  dx[1] = c.gamma * xy - c.delta * x[1];
}

struct LvField {
  LvConstants constants;
  template <class S>
  void operator()(std::span<const S> x, std::span<S> dx) const {
    lv_rhs<S>(x, dx, constants);
  }
};

/// True system sampled at `times` from (t0, x0) with steps of at most h_max.
Eigen::MatrixXd lv_reference(std::span<const double> x0, double t0, std::span<const double> times,
                             double h_max = 1e-4);

/// N equidistant samples on span (endpoints included) from x0, plus
/// i.i.d. N(0, sigma) noise per entry drawn from `seed`.
ObservationSet generate_data(std::size_t n, double sigma, std::uint64_t seed,
                             std::vector<double> x0 = {1.0, 1.0},
                             std::pair<double, double> span = {0.0, 7.0});

enum class SetupName { ex_it, ex_oot, ex_ood };
std::string to_string(SetupName s);
SetupName setup_from_string(const std::string& name);

struct EvalSetup {
  SetupName name;
  double t_start;
  double t_end;
  std::vector<double> x0;
};

/// ex_it (0,7) from (1,1); ex_oot (0,14) from (1,1); ex_ood (0,14) from (0.5,0.5).
const std::array<EvalSetup, 3>& eval_setups();
const EvalSetup& eval_setup(SetupName name);

/// MSE of the learned trajectory against the true one on n_eval equidistant
/// points of the setup span. A diverged learned solve gives +inf.
double evaluate(const RhsModel& rhs, std::span<const double> params, const EvalSetup& setup,
                std::size_t n_eval = 200, const StepPolicy& step = {});
double evaluate(const TrainedModel& model, const EvalSetup& setup, std::size_t n_eval = 200,
                const StepPolicy& step = {});

inline constexpr double kFailureThreshold = 10.0;

/// Succeeds unless the MSE exceeds the threshold (or is not finite).
inline bool is_success(double mse) { return mse <= kFailureThreshold; }

struct ScenarioRecord {
  std::string scenario;  // S1..S4
  std::string method;    // chaos, kernel, neural
  std::string basis_variant = "n/a";
  std::size_t n_train = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double mse_ex_it = 0.0;
  double mse_ex_oot = 0.0;
  double mse_ex_ood = 0.0;
  double final_loss = 0.0;
  double gram_condition = 0.0;  // S4 only, else NaN
  std::string status = "ok";    // ok, failed
  std::string message;
  double wall_time = 0.0;
  nlohmann::json config;  // resolved pipeline config of the run

  double mse(SetupName s) const;
  bool success(SetupName s) const { return is_success(mse(s)); }
  /// Identifies the sweep cell; equal keys mean the same job.
  std::string cell_key() const;
};

nlohmann::json to_json(const ScenarioRecord& r);
ScenarioRecord record_from_json(const nlohmann::json& j);

/// scenario,method,basis_variant,n_train,sigma,seed,mse_ex_it,mse_ex_oot,
/// mse_ex_ood,success_ex_it,success_ex_oot,success_ex_ood,wall_time_s
std::string csv_header();
std::string to_csv_row(const ScenarioRecord& r);

struct ScenarioConfig {
  std::string id = "S1";
  std::vector<std::string> methods{"chaos", "kernel", "neural"};
  std::vector<std::string> basis_variants{"orthonormal", "monomial"};  // S4
  std::vector<std::size_t> n_grid;   // empty: scenario default
  std::vector<double> sigma_grid;    // empty: scenario default
  std::size_t seeds = 0;             // 0: scenario default
  std::uint64_t seed_offset = 0;
  std::size_t workers = 0;  // 0: one per hardware thread
  std::size_t n_eval = 200;
  // S1 perfect-information pretraining
  std::vector<std::pair<double, double>> pretrain_region{{0.25, 7.0}, {0.25, 7.0}};
  std::size_t pretrain_grid = 50;
  std::size_t s1_n_train = 144;
};

/// One job of a sweep.
struct Cell {
  std::string scenario;
  std::string method;
  std::string basis_variant = "n/a";
  std::size_t n_train = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string key() const;
};

/// Every cell of the sweep in a fixed order, with defaults resolved.
std::vector<Cell> scenario_cells(const ScenarioConfig& config);

/// Trains and evaluates one cell; failures are recorded, never thrown. The
/// record's config echo holds the pipeline and the scenario section (minus
/// the worker counts, which do not affect results).
ScenarioRecord run_cell(const Cell& cell, const ScenarioConfig& scenario, const PipelineConfig& base);

/// Runs the cells not in `skip_keys` on the worker pool; `sink` is called
/// (serialized) as each record completes. Returns all new records in cell order.
std::vector<ScenarioRecord> run_scenario(const ScenarioConfig& scenario, const PipelineConfig& base,
                                         const std::set<std::string>& skip_keys = {},
                                         const std::function<void(const ScenarioRecord&)>& sink = {});

std::vector<ScenarioRecord> run_scenario_s1(const ScenarioConfig& scenario, const PipelineConfig& base);
std::vector<ScenarioRecord> run_scenario_s2(const ScenarioConfig& scenario, const PipelineConfig& base);
std::vector<ScenarioRecord> run_scenario_s3(const ScenarioConfig& scenario, const PipelineConfig& base);
std::vector<ScenarioRecord> run_scenario_s4(const ScenarioConfig& scenario, const PipelineConfig& base);

enum class Statistic { median, min, success_rate };

/// Median of the values; throws EmptyGroup.
double median(std::vector<double> values);

struct AggregateRow {
  std::vector<std::string> group;
  double value = 0.0;
  std::size_t count = 0;
};

/// Groups records by the named fields (scenario, method, basis_variant,
/// n_train, sigma, seed) in ascending key order and reduces `field`
/// (mse_ex_it, mse_ex_oot, mse_ex_ood, wall_time, gram_condition; for
/// success_rate the setup name) with the statistic. Throws EmptyGroup when
/// there are no records.
std::vector<AggregateRow> aggregate(const std::vector<ScenarioRecord>& records,
                                    const std::vector<std::string>& group_by, const std::string& field,
                                    Statistic statistic);

/// Figure ids accepted by figure_csv.
const std::vector<std::string>& figure_ids();

/// Long-format plot data for one figure. Throws EmptyGroup when the records
/// hold nothing for it and std::invalid_argument for an unknown id.
std::string figure_csv(const std::vector<ScenarioRecord>& records, const std::string& figure_id);

}  // namespace chaosode
