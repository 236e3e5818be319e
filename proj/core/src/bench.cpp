#include "chaosode/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "chaosode/apce.hpp"
#include "chaosode/config.hpp"
#include "chaosode/errors.hpp"
#include "chaosode/json_io.hpp"
#include "chaosode/kernel.hpp"

namespace chaosode {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> equidistant(double a, double b, std::size_t m) {
  std::vector<double> t(m);
  for (std::size_t i = 0; i < m; ++i)
    t[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(m - 1);
  t.back() = b;
  return t;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Reference {
  std::vector<double> times;
  Eigen::MatrixXd states;
};

const Reference& cached_reference(SetupName name) {
  static const std::array<Reference, 3> cache = [] {
    std::array<Reference, 3> out;
    for (std::size_t i = 0; i < 3; ++i) {
      const EvalSetup& s = eval_setups()[i];
      out[i].times = equidistant(s.t_start, s.t_end, 200);
      out[i].states = lv_reference(s.x0, s.t_start, out[i].times);
    }
    return out;
  }();
  return cache[static_cast<std::size_t>(name)];
}

double field_value(const ScenarioRecord& r, const std::string& field) {
  if (field == "mse_ex_it") return r.mse_ex_it;
  if (field == "mse_ex_oot") return r.mse_ex_oot;
  if (field == "mse_ex_ood") return r.mse_ex_ood;
  if (field == "wall_time") return r.wall_time;
  if (field == "gram_condition") return r.gram_condition;
  if (field == "final_loss") return r.final_loss;
  throw std::invalid_argument("aggregate: unknown field " + field);
}

struct KeyPart {
  double num = 0.0;
  std::string str;
  auto operator<=>(const KeyPart&) const = default;
};

KeyPart key_part(const ScenarioRecord& r, const std::string& name) {
  if (name == "scenario") return {0.0, r.scenario};
  if (name == "method") return {0.0, r.method};
  if (name == "basis_variant") return {0.0, r.basis_variant};
  if (name == "n_train") return {static_cast<double>(r.n_train), std::to_string(r.n_train)};
  if (name == "sigma") return {r.sigma, fmt(r.sigma)};
  if (name == "seed") return {static_cast<double>(r.seed), std::to_string(r.seed)};
  throw std::invalid_argument("aggregate: unknown group key " + name);
}

std::vector<ScenarioRecord> select(const std::vector<ScenarioRecord>& records, const std::string& scenario,
                                   const std::function<bool(const ScenarioRecord&)>& keep = {}) {
  std::vector<ScenarioRecord> out;
  for (const auto& r : records)
    if (r.scenario == scenario && (!keep || keep(r))) out.push_back(r);
  return out;
}

void check_scenario_id(const std::string& id) {
  if (id != "S1" && id != "S2" && id != "S3" && id != "S4") throw std::invalid_argument("unknown scenario " + id);
}

}  // namespace

Eigen::MatrixXd lv_reference(std::span<const double> x0, double t0, std::span<const double> times, double h_max) {
  const auto flat = solve_generic<double>(LvField{}, x0, t0, times, StepPolicy{0, h_max});
  Eigen::MatrixXd states(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(x0.size()));
  for (Eigen::Index r = 0; r < states.rows(); ++r)
    for (Eigen::Index c = 0; c < states.cols(); ++c)
      states(r, c) = flat[static_cast<std::size_t>(r * states.cols() + c)];
  return states;
}

ObservationSet generate_data(std::size_t n, double sigma, std::uint64_t seed, std::vector<double> x0,
                             std::pair<double, double> span) {
  if (n < 2) throw std::invalid_argument("generate_data: need N >= 2");
  if (!(sigma >= 0.0)) throw std::invalid_argument("generate_data: sigma must be >= 0");
  ObservationSet data;
  data.times = equidistant(span.first, span.second, n);
  data.states = lv_reference(x0, span.first, data.times);
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index r = 0; r < data.states.rows(); ++r)
      for (Eigen::Index c = 0; c < data.states.cols(); ++c) data.states(r, c) += noise(rng);
  }
  data.sigma = sigma;
  data.seed = seed;
  data.x0 = std::move(x0);
  data.t0 = span.first;
  return data;
}

std::string to_string(SetupName s) {
  switch (s) {
    case SetupName::ex_it:
      return "ex_it";
    case SetupName::ex_oot:
      return "ex_oot";
    case SetupName::ex_ood:
      return "ex_ood";
  }
  return "?";
}

SetupName setup_from_string(const std::string& name) {
  if (name == "ex_it" || name == "ex-it") return SetupName::ex_it;
  if (name == "ex_oot" || name == "ex-oot") return SetupName::ex_oot;
  if (name == "ex_ood" || name == "ex-ood") return SetupName::ex_ood;
  throw std::invalid_argument("unknown setup '" + name + "'");
}

const std::array<EvalSetup, 3>& eval_setups() {
  static const std::array<EvalSetup, 3> setups{
      EvalSetup{SetupName::ex_it, 0.0, 7.0, {1.0, 1.0}},
      EvalSetup{SetupName::ex_oot, 0.0, 14.0, {1.0, 1.0}},
      EvalSetup{SetupName::ex_ood, 0.0, 14.0, {0.5, 0.5}},
  };
  return setups;
}

const EvalSetup& eval_setup(SetupName name) { return eval_setups()[static_cast<std::size_t>(name)]; }

double evaluate(const RhsModel& rhs, std::span<const double> params, const EvalSetup& setup, std::size_t n_eval,
                const StepPolicy& step) {
  if (n_eval < 2) throw std::invalid_argument("evaluate: need at least two points");
  Reference fresh;
  const Reference* ref = nullptr;
  if (n_eval == 200) {
    ref = &cached_reference(setup.name);
  } else {
    fresh.times = equidistant(setup.t_start, setup.t_end, n_eval);
    fresh.states = lv_reference(setup.x0, setup.t_start, fresh.times);
    ref = &fresh;
  }
  const auto coeffs = rhs.coefficients(params);
  std::vector<double> learned;
  try {
    learned = solve_generic<double>(RhsField<double>{&rhs, coeffs}, std::span<const double>(setup.x0), setup.t_start,
                                    ref->times, step);
  } catch (const Diverged&) {
    return kInf;
  }
  double sse = 0.0;
  const auto n = static_cast<std::size_t>(ref->states.cols());
  for (std::size_t r = 0; r < ref->times.size(); ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double e = learned[r * n + c] - ref->states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      sse += e * e;
    }
  const double mse = sse / static_cast<double>(ref->times.size() * n);
  return std::isfinite(mse) ? mse : kInf;
}

double evaluate(const TrainedModel& model, const EvalSetup& setup, std::size_t n_eval, const StepPolicy& step) {
  return evaluate(*model.rhs, model.params, setup, n_eval, step);
}

double ScenarioRecord::mse(SetupName s) const {
  switch (s) {
    case SetupName::ex_it:
      return mse_ex_it;
    case SetupName::ex_oot:
      return mse_ex_oot;
    case SetupName::ex_ood:
      return mse_ex_ood;
  }
  return kInf;
}

std::string Cell::key() const {
  return scenario + "|" + method + "|" + basis_variant + "|" + std::to_string(n_train) + "|" + fmt(sigma) + "|" +
         std::to_string(seed);
}

std::string ScenarioRecord::cell_key() const {
  return Cell{scenario, method, basis_variant, n_train, sigma, seed}.key();
}

nlohmann::json to_json(const ScenarioRecord& r) {
  return {{"scenario", r.scenario},
          {"method", r.method},
          {"basis_variant", r.basis_variant},
          {"n_train", r.n_train},
          {"sigma", r.sigma},
          {"seed", r.seed},
          {"mse_ex_it", finite_or_null(r.mse_ex_it)},
          {"mse_ex_oot", finite_or_null(r.mse_ex_oot)},
          {"mse_ex_ood", finite_or_null(r.mse_ex_ood)},
          {"success_ex_it", r.success(SetupName::ex_it)},
          {"success_ex_oot", r.success(SetupName::ex_oot)},
          {"success_ex_ood", r.success(SetupName::ex_ood)},
          {"final_loss", finite_or_null(r.final_loss)},
          {"gram_condition", finite_or_null(r.gram_condition)},
          {"status", r.status},
          {"message", r.message},
          {"wall_time", r.wall_time},
          {"config", r.config}};
}

ScenarioRecord record_from_json(const nlohmann::json& j) {
  ScenarioRecord r;
  r.scenario = j.at("scenario").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.basis_variant = j.at("basis_variant").get<std::string>();
  r.n_train = j.at("n_train").get<std::size_t>();
  r.sigma = j.at("sigma").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.mse_ex_it = number_or_inf(j.at("mse_ex_it"));
  r.mse_ex_oot = number_or_inf(j.at("mse_ex_oot"));
  r.mse_ex_ood = number_or_inf(j.at("mse_ex_ood"));
  r.final_loss = number_or_inf(j.at("final_loss"));
  r.gram_condition = j.at("gram_condition").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                       : j.at("gram_condition").get<double>();
  r.status = j.at("status").get<std::string>();
  r.message = j.at("message").get<std::string>();
  r.wall_time = j.at("wall_time").get<double>();
  r.config = j.at("config");
  for (SetupName s : {SetupName::ex_it, SetupName::ex_oot, SetupName::ex_ood}) {
    const std::string key = "success_" + to_string(s);
    if (j.contains(key) && j.at(key).get<bool>() != r.success(s))
      throw std::invalid_argument("record: " + key + " disagrees with its MSE");
  }
  return r;
}

std::string csv_header() {
  return "scenario,method,basis_variant,n_train,sigma,seed,mse_ex_it,mse_ex_oot,mse_ex_ood,"
         "success_ex_it,success_ex_oot,success_ex_ood,wall_time_s";
}

std::string to_csv_row(const ScenarioRecord& r) {
  std::ostringstream os;
  os << r.scenario << ',' << r.method << ',' << r.basis_variant << ',' << r.n_train << ',' << fmt(r.sigma) << ','
     << r.seed << ',' << fmt(r.mse_ex_it) << ',' << fmt(r.mse_ex_oot) << ',' << fmt(r.mse_ex_ood) << ','
     << r.success(SetupName::ex_it) << ',' << r.success(SetupName::ex_oot) << ',' << r.success(SetupName::ex_ood)
     << ',' << fmt(r.wall_time);
  return os.str();
}

std::vector<Cell> scenario_cells(const ScenarioConfig& config) {
  check_scenario_id(config.id);
  const std::string& id = config.id;
  std::vector<std::size_t> n_grid = config.n_grid;
  std::vector<double> sigma_grid = config.sigma_grid;
  std::size_t seeds = config.seeds;
  if (id == "S1") {
    n_grid = {config.s1_n_train};
    sigma_grid = {0.0};
    if (seeds == 0) seeds = 1;
  } else if (id == "S2") {
    if (n_grid.empty()) n_grid = {10, 18, 35, 70, 100, 250, 500};
    sigma_grid = {0.0};
  } else {
    if (n_grid.empty()) n_grid = {10, 35, 100, 500};
    if (sigma_grid.empty()) sigma_grid = {0.0, 0.001, 0.01, 0.1, 1.0};
  }
  if (seeds == 0) seeds = 10;
  std::vector<std::string> methods = config.methods;
  std::vector<std::string> variants{"n/a"};
  if (id == "S4") {
    methods = {"chaos"};
    variants = config.basis_variants;
  }
  std::vector<Cell> cells;
  for (const auto& m : methods)
    for (const auto& v : variants)
      for (std::size_t n : n_grid)
        for (double s : sigma_grid)
          for (std::size_t k = 0; k < seeds; ++k) cells.push_back(Cell{id, m, v, n, s, config.seed_offset + k});
  return cells;
}

ScenarioRecord run_cell(const Cell& cell, const ScenarioConfig& scenario, const PipelineConfig& base) {
  const auto start = std::chrono::steady_clock::now();
  ScenarioRecord rec;
  rec.scenario = cell.scenario;
  rec.method = cell.method;
  rec.basis_variant = cell.basis_variant;
  rec.n_train = cell.n_train;
  rec.sigma = cell.sigma;
  rec.seed = cell.seed;
  rec.gram_condition = std::numeric_limits<double>::quiet_NaN();

  PipelineConfig cfg = base;
  cfg.seed = cell.seed;
  if (scenario.workers != 1) cfg.workers = 1;
  try {
    cfg.model.kind = rhs_kind_from_string(cell.method);
    if (cell.basis_variant != "n/a") cfg.model.basis_variant = basis_variant_from_string(cell.basis_variant);
    rec.config = pipeline_echo(cfg);
    rec.config["scenario"] = to_json(scenario);
    rec.config["scenario"].erase("workers");
    rec.config["pipeline"].erase("workers");

    const ObservationSet data = generate_data(cell.n_train, cell.sigma, cell.seed);
    TrainedModel model;
    if (cell.scenario == "S1") {
      const Eigen::MatrixXd grid = grid_points(scenario.pretrain_region, scenario.pretrain_grid);
      RhsPtr rhs = build_rhs(cfg.model, grid);
      auto params = pretrain_perfect_information(
          *rhs, [](std::span<const double> x, std::span<double> dx) { lv_rhs<double>(x, dx); },
          scenario.pretrain_region, scenario.pretrain_grid, cfg.init, derive_seed(cfg.seed, 0));
      model = train_from(data, std::move(rhs), std::move(params), cfg);
    } else {
      model = train(data, cfg);
    }
    if (cell.scenario == "S4") {
      const auto& chaos = dynamic_cast<const ChaosRhs&>(*model.rhs);
      rec.gram_condition = condition_number(gram_matrix(chaos.basis(), data.states));
    }
    rec.final_loss = model.final_loss;
    rec.mse_ex_it = evaluate(model, eval_setup(SetupName::ex_it), scenario.n_eval, cfg.step);
    rec.mse_ex_oot = evaluate(model, eval_setup(SetupName::ex_oot), scenario.n_eval, cfg.step);
    rec.mse_ex_ood = evaluate(model, eval_setup(SetupName::ex_ood), scenario.n_eval, cfg.step);
  } catch (const std::exception& e) {
    rec.status = "failed";
    rec.message = e.what();
    rec.final_loss = rec.mse_ex_it = rec.mse_ex_oot = rec.mse_ex_ood = kInf;
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<ScenarioRecord> run_scenario(const ScenarioConfig& scenario, const PipelineConfig& base,
                                         const std::set<std::string>& skip_keys,
                                         const std::function<void(const ScenarioRecord&)>& sink) {
  std::vector<Cell> todo;
  for (auto& c : scenario_cells(scenario))
    if (!skip_keys.contains(c.key())) todo.push_back(std::move(c));
  std::vector<ScenarioRecord> out(todo.size());
  std::mutex sink_mutex;
  std::size_t workers = scenario.workers;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  parallel_for(todo.size(), workers, [&](std::size_t i) {
    out[i] = run_cell(todo[i], scenario, base);
    if (sink) {
      const std::lock_guard lock(sink_mutex);
      sink(out[i]);
    }
  });
  return out;
}

namespace {
std::vector<ScenarioRecord> run_as(const std::string& id, ScenarioConfig scenario, const PipelineConfig& base) {
  scenario.id = id;
  return run_scenario(scenario, base);
}
}  // namespace

std::vector<ScenarioRecord> run_scenario_s1(const ScenarioConfig& s, const PipelineConfig& b) { return run_as("S1", s, b); }
std::vector<ScenarioRecord> run_scenario_s2(const ScenarioConfig& s, const PipelineConfig& b) { return run_as("S2", s, b); }
std::vector<ScenarioRecord> run_scenario_s3(const ScenarioConfig& s, const PipelineConfig& b) { return run_as("S3", s, b); }
std::vector<ScenarioRecord> run_scenario_s4(const ScenarioConfig& s, const PipelineConfig& b) { return run_as("S4", s, b); }

double median(std::vector<double> values) {
  if (values.empty()) throw EmptyGroup("median of no values");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return std::isinf(hi) ? hi : 0.5 * (lo + hi);
}

std::vector<AggregateRow> aggregate(const std::vector<ScenarioRecord>& records,
                                    const std::vector<std::string>& group_by, const std::string& field,
                                    Statistic statistic) {
  if (records.empty()) throw EmptyGroup("no records");
  std::map<std::vector<KeyPart>, std::vector<double>> groups;
  const SetupName setup = statistic == Statistic::success_rate ? setup_from_string(field) : SetupName::ex_it;
  for (const auto& r : records) {
    std::vector<KeyPart> key;
    for (const auto& g : group_by) key.push_back(key_part(r, g));
    groups[key].push_back(statistic == Statistic::success_rate ? (r.success(setup) ? 1.0 : 0.0)
                                                               : field_value(r, field));
  }
  std::vector<AggregateRow> rows;
  for (const auto& [key, values] : groups) {
    AggregateRow row;
    for (const auto& k : key) row.group.push_back(k.str);
    row.count = values.size();
    switch (statistic) {
      case Statistic::median:
        row.value = median(values);
        break;
      case Statistic::min:
        row.value = *std::min_element(values.begin(), values.end());
        break;
      case Statistic::success_rate: {
        double s = 0.0;
        for (double v : values) s += v;
        row.value = s / static_cast<double>(values.size());
        break;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"s1_table", "s2_ex_it", "s2_ex_oot", "s2_ex_ood", "s3_success",
                                            "s3_box_10", "s3_box_500", "s4_ood",    "s4_exit",   "s4_oot",
                                            "s4_time"};
  return ids;
}

std::string figure_csv(const std::vector<ScenarioRecord>& records, const std::string& id) {
  if (std::find(figure_ids().begin(), figure_ids().end(), id) == figure_ids().end())
    throw std::invalid_argument("unknown figure id '" + id + "'");
  std::ostringstream os;
  const auto need = [&](const std::vector<ScenarioRecord>& rs) {
    if (rs.empty()) throw EmptyGroup(id);
    return rs;
  };

  if (id == "s1_table") {
    const auto rs = need(select(records, "S1"));
    os << "x,group,value\n";
    for (SetupName s : {SetupName::ex_it, SetupName::ex_oot, SetupName::ex_ood})
      for (const auto& row : aggregate(rs, {"method"}, "mse_" + to_string(s), Statistic::median))
        os << to_string(s) << ',' << row.group[0] << ',' << fmt(row.value) << '\n';
  } else if (id.starts_with("s2_")) {
    const auto rs = need(select(records, "S2"));
    const std::string field = "mse_" + id.substr(3);
    os << "x,group,value\n";
    for (const auto& row : aggregate(rs, {"method", "n_train"}, field, Statistic::median))
      os << row.group[1] << ',' << row.group[0] << ',' << fmt(row.value) << '\n';
    for (const auto& row : aggregate(rs, {"method", "n_train"}, field, Statistic::min))
      os << row.group[1] << ',' << row.group[0] << "_best," << fmt(row.value) << '\n';
  } else if (id == "s3_success") {
    const auto rs = need(select(records, "S3"));
    os << "method,sigma,n_train,setup,rate\n";
    for (SetupName s : {SetupName::ex_it, SetupName::ex_oot, SetupName::ex_ood})
      for (const auto& row : aggregate(rs, {"method", "sigma", "n_train"}, to_string(s), Statistic::success_rate))
        os << row.group[0] << ',' << row.group[1] << ',' << row.group[2] << ',' << to_string(s) << ','
           << fmt(row.value) << '\n';
  } else if (id.starts_with("s3_box_")) {
    const std::size_t n = std::stoul(id.substr(7));
    const auto rs = need(select(records, "S3", [n](const ScenarioRecord& r) { return r.n_train == n; }));
    os << "x,group,value\n";
    for (const auto& r : rs)
      for (SetupName s : {SetupName::ex_it, SetupName::ex_oot, SetupName::ex_ood})
        os << fmt(r.sigma) << ',' << r.method << '/' << to_string(s) << ',' << fmt(r.mse(s)) << '\n';
  } else {
    const auto rs = need(select(records, "S4"));
    std::string field = "wall_time";
    if (id == "s4_ood") field = "mse_ex_ood";
    if (id == "s4_exit") field = "mse_ex_it";
    if (id == "s4_oot") field = "mse_ex_oot";
    os << "x,group,value\n";
    for (const auto& row : aggregate(rs, {"basis_variant", "sigma", "n_train"}, field, Statistic::median))
      os << row.group[2] << ',' << row.group[0] << "/sigma=" << row.group[1] << ',' << fmt(row.value) << '\n';
  }
  return os.str();
}

}  // namespace chaosode
