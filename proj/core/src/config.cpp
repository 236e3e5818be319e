#include "chaosode/config.hpp"

#include <fstream>
#include <sstream>

#include "chaosode/errors.hpp"

namespace chaosode {

namespace {

using nlohmann::json;

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    if (a.is_number_float()) return true;
    if (b.is_number_float()) return false;
    return !(a.is_number_unsigned() && b.is_number_integer() && !b.is_number_unsigned());
  }
  return a.type() == b.type();
}

json overlay(const json& defaults, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path.empty() ? "document must be an object" : path + " must be an object");
  json out = defaults;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown key '" + key + "'");
    const json& d = defaults.at(it.key());
    if (d.is_object()) {
      out[it.key()] = overlay(d, it.value(), key);
    } else {
      if (!same_kind(d, it.value())) throw ConfigError("wrong type for '" + key + "'");
      out[it.key()] = it.value();
    }
  }
  return out;
}

template <class T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for '" + section + "." + key + "'");
  }
}

json step_json(const StepPolicy& s) { return {{"substeps", s.substeps}, {"h_max", s.h_max}}; }

json qn_json(const QuasiNewtonConfig& q, bool enabled) {
  return {{"enabled", enabled},
          {"max_iters", q.max_iters},
          {"grad_tol", q.grad_tol},
          {"wolfe_c1", q.wolfe_c1},
          {"wolfe_c2", q.wolfe_c2},
          {"max_line_search_evals", q.max_line_search_evals},
          {"dense_max_dim", q.dense_max_dim},
          {"lbfgs_memory", q.lbfgs_memory},
          {"f_rel_tol", q.f_rel_tol},
          {"stall_iters", q.stall_iters}};
}

QuasiNewtonConfig qn_from(const json& j, const std::string& s) {
  QuasiNewtonConfig q;
  q.max_iters = get<std::size_t>(j, "max_iters", s);
  q.grad_tol = get<double>(j, "grad_tol", s);
  q.wolfe_c1 = get<double>(j, "wolfe_c1", s);
  q.wolfe_c2 = get<double>(j, "wolfe_c2", s);
  q.max_line_search_evals = get<std::size_t>(j, "max_line_search_evals", s);
  q.dense_max_dim = get<std::size_t>(j, "dense_max_dim", s);
  q.lbfgs_memory = get<std::size_t>(j, "lbfgs_memory", s);
  q.f_rel_tol = get<double>(j, "f_rel_tol", s);
  q.stall_iters = get<std::size_t>(j, "stall_iters", s);
  if (!(q.wolfe_c1 > 0.0 && q.wolfe_c1 < q.wolfe_c2 && q.wolfe_c2 < 1.0))
    throw ConfigError(s + ": need 0 < wolfe_c1 < wolfe_c2 < 1");
  return q;
}

ModelConfig model_from(const json& j) {
  const std::string s = "model";
  ModelConfig m;
  try {
    m.kind = rhs_kind_from_string(get<std::string>(j, "kind", s));
    m.basis_variant = basis_variant_from_string(get<std::string>(j, "basis_variant", s));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  m.n_max = get<std::size_t>(j, "n_max", s);
  m.pilots_per_dim = get<std::size_t>(j, "pilots_per_dim", s);
  m.pilot_inflate = get<double>(j, "pilot_inflate", s);
  m.kernel_lengthscale = get<double>(j, "kernel_lengthscale", s);
  m.kernel_lambda = get<double>(j, "kernel_lambda", s);
  m.widths = get<std::vector<std::size_t>>(j, "widths", s);
  return m;
}

PipelineConfig pipeline_from(const json& j, ModelConfig model) {
  const std::string s = "pipeline";
  PipelineConfig p;
  p.model = std::move(model);
  p.segment_size = get<std::size_t>(j, "segment_size", s);
  p.continuity_weight = get<double>(j, "continuity_weight", s);
  p.step.substeps = get<int>(j.at("step"), "substeps", s + ".step");
  p.step.h_max = get<double>(j.at("step"), "h_max", s + ".step");
  p.penalty = get<double>(j, "penalty", s);
  p.seed = get<std::uint64_t>(j, "seed", s);
  p.workers = get<std::size_t>(j, "workers", s);

  const json& init = j.at("init");
  p.init.surrogate_spacing_factor = get<double>(init, "surrogate_spacing_factor", s + ".init");
  p.init.surrogate_lambda = get<double>(init, "surrogate_lambda", s + ".init");
  p.init.ridge = get<double>(init, "ridge", s + ".init");
  p.init.pretrain_ridge = get<double>(init, "pretrain_ridge", s + ".init");
  p.init.neural_steps = get<std::size_t>(init, "neural_steps", s + ".init");
  p.init.neural_learning_rate = get<double>(init, "neural_learning_rate", s + ".init");

  const json& st = j.at("stages");
  const json& pso = st.at("pso");
  const std::string ps = s + ".stages.pso";
  p.run_pso = get<bool>(pso, "enabled", ps);
  p.pso.swarm = get<std::size_t>(pso, "swarm", ps);
  p.pso.iters = get<std::size_t>(pso, "iters", ps);
  p.pso.inertia = get<double>(pso, "inertia", ps);
  p.pso.c1 = get<double>(pso, "c1", ps);
  p.pso.c2 = get<double>(pso, "c2", ps);
  p.pso.vmax_factor = get<double>(pso, "vmax_factor", ps);

  const json& cma = st.at("cmaes");
  const std::string cs = s + ".stages.cmaes";
  p.run_cmaes = get<bool>(cma, "enabled", cs);
  p.cmaes.sigma0 = get<double>(cma, "sigma0", cs);
  p.cmaes.popsize = get<std::size_t>(cma, "popsize", cs);
  p.cmaes.max_evals = get<std::size_t>(cma, "max_evals", cs);
  p.cmaes.max_iters = get<std::size_t>(cma, "max_iters", cs);
  p.cmaes.tol_fun = get<double>(cma, "tol_fun", cs);
  p.cmaes.tol_x = get<double>(cma, "tol_x", cs);
  p.cmaes.full_covariance_max_dim = get<std::size_t>(cma, "full_covariance_max_dim", cs);

  p.run_qn_multiple = get<bool>(st.at("qn_multiple"), "enabled", s + ".stages.qn_multiple");
  p.qn_multiple = qn_from(st.at("qn_multiple"), s + ".stages.qn_multiple");
  p.run_qn_single = get<bool>(st.at("qn_single"), "enabled", s + ".stages.qn_single");
  p.qn_single = qn_from(st.at("qn_single"), s + ".stages.qn_single");
  p.validate();
  return p;
}

DataConfig data_from(const json& j) {
  const std::string s = "data";
  DataConfig d;
  d.n = get<std::size_t>(j, "n", s);
  d.sigma = get<double>(j, "sigma", s);
  d.seed = get<std::uint64_t>(j, "seed", s);
  d.x0 = get<std::vector<double>>(j, "x0", s);
  const auto span = get<std::vector<double>>(j, "span", s);
  if (span.size() != 2 || !(span[1] > span[0])) throw ConfigError("data.span must be [t0, t_end] with t_end > t0");
  d.span = {span[0], span[1]};
  if (d.n < 2) throw ConfigError("data.n must be >= 2");
  if (!(d.sigma >= 0.0)) throw ConfigError("data.sigma must be >= 0");
  if (d.x0.size() != 2) throw ConfigError("data.x0 must have two entries");
  return d;
}

ScenarioConfig scenario_from(const json& j) {
  const std::string s = "scenario";
  ScenarioConfig c;
  c.id = get<std::string>(j, "id", s);
  if (c.id != "S1" && c.id != "S2" && c.id != "S3" && c.id != "S4")
    throw ConfigError("scenario.id must be one of S1, S2, S3, S4");
  c.methods = get<std::vector<std::string>>(j, "methods", s);
  for (const auto& m : c.methods)
    if (m != "chaos" && m != "kernel" && m != "neural") throw ConfigError("scenario.methods: unknown method " + m);
  c.basis_variants = get<std::vector<std::string>>(j, "basis_variants", s);
  for (const auto& v : c.basis_variants)
    if (v != "orthonormal" && v != "monomial") throw ConfigError("scenario.basis_variants: unknown variant " + v);
  c.n_grid = get<std::vector<std::size_t>>(j, "n_grid", s);
  c.sigma_grid = get<std::vector<double>>(j, "sigma_grid", s);
  c.seeds = get<std::size_t>(j, "seeds", s);
  c.seed_offset = get<std::uint64_t>(j, "seed_offset", s);
  c.workers = get<std::size_t>(j, "workers", s);
  c.n_eval = get<std::size_t>(j, "n_eval", s);
  const auto region = get<std::vector<std::vector<double>>>(j, "pretrain_region", s);
  c.pretrain_region.clear();
  for (const auto& r : region) {
    if (r.size() != 2 || !(r[1] > r[0])) throw ConfigError("scenario.pretrain_region entries must be [lo, hi]");
    c.pretrain_region.emplace_back(r[0], r[1]);
  }
  c.pretrain_grid = get<std::size_t>(j, "pretrain_grid", s);
  c.s1_n_train = get<std::size_t>(j, "s1_n_train", s);
  if (c.n_eval < 2) throw ConfigError("scenario.n_eval must be >= 2");
  for (std::size_t n : c.n_grid)
    if (n < 4) throw ConfigError("scenario.n_grid entries must be >= 4");
  return c;
}

OutputConfig output_from(const json& j) {
  OutputConfig o;
  o.directory = get<std::string>(j, "directory", "output");
  o.formats = get<std::vector<std::string>>(j, "formats", "output");
  for (const auto& f : o.formats)
    if (f != "jsonl" && f != "csv") throw ConfigError("output.formats: unknown format " + f);
  return o;
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"n_max", c.n_max},
          {"basis_variant", to_string(c.basis_variant)},
          {"pilots_per_dim", c.pilots_per_dim},
          {"pilot_inflate", c.pilot_inflate},
          {"kernel_lengthscale", c.kernel_lengthscale},
          {"kernel_lambda", c.kernel_lambda},
          {"widths", c.widths}};
}

nlohmann::json to_json(const PipelineConfig& c) {
  return {{"segment_size", c.segment_size},
          {"continuity_weight", c.continuity_weight},
          {"step", step_json(c.step)},
          {"penalty", c.penalty},
          {"seed", c.seed},
          {"workers", c.workers},
          {"init",
           {{"surrogate_spacing_factor", c.init.surrogate_spacing_factor},
            {"surrogate_lambda", c.init.surrogate_lambda},
            {"ridge", c.init.ridge},
            {"pretrain_ridge", c.init.pretrain_ridge},
            {"neural_steps", c.init.neural_steps},
            {"neural_learning_rate", c.init.neural_learning_rate}}},
          {"stages",
           {{"pso",
             {{"enabled", c.run_pso},
              {"swarm", c.pso.swarm},
              {"iters", c.pso.iters},
              {"inertia", c.pso.inertia},
              {"c1", c.pso.c1},
              {"c2", c.pso.c2},
              {"vmax_factor", c.pso.vmax_factor}}},
            {"cmaes",
             {{"enabled", c.run_cmaes},
              {"sigma0", c.cmaes.sigma0},
              {"popsize", c.cmaes.popsize},
              {"max_evals", c.cmaes.max_evals},
              {"max_iters", c.cmaes.max_iters},
              {"tol_fun", c.cmaes.tol_fun},
              {"tol_x", c.cmaes.tol_x},
              {"full_covariance_max_dim", c.cmaes.full_covariance_max_dim}}},
            {"qn_multiple", qn_json(c.qn_multiple, c.run_qn_multiple)},
            {"qn_single", qn_json(c.qn_single, c.run_qn_single)}}}};
}

nlohmann::json to_json(const DataConfig& c) {
  return {{"n", c.n}, {"sigma", c.sigma}, {"seed", c.seed}, {"x0", c.x0}, {"span", {c.span.first, c.span.second}}};
}

nlohmann::json to_json(const ScenarioConfig& c) {
  json region = json::array();
  for (const auto& [lo, hi] : c.pretrain_region) region.push_back({lo, hi});
  return {{"id", c.id},
          {"methods", c.methods},
          {"basis_variants", c.basis_variants},
          {"n_grid", c.n_grid},
          {"sigma_grid", c.sigma_grid},
          {"seeds", c.seeds},
          {"seed_offset", c.seed_offset},
          {"workers", c.workers},
          {"n_eval", c.n_eval},
          {"pretrain_region", region},
          {"pretrain_grid", c.pretrain_grid},
          {"s1_n_train", c.s1_n_train}};
}

nlohmann::json to_json(const OutputConfig& c) { return {{"directory", c.directory}, {"formats", c.formats}}; }

nlohmann::json to_json(const RunConfig& c) {
  return {{"data", to_json(c.data)},
          {"model", to_json(c.pipeline.model)},
          {"pipeline", to_json(c.pipeline)},
          {"scenario", to_json(c.scenario)},
          {"output", to_json(c.output)}};
}

nlohmann::json pipeline_echo(const PipelineConfig& c) {
  return {{"model", to_json(c.model)}, {"pipeline", to_json(c)}};
}

PipelineConfig pipeline_from_echo(const nlohmann::json& echo) {
  const RunConfig defaults;
  const json d = pipeline_echo(defaults.pipeline);
  const json merged = overlay(d, echo, "");
  return pipeline_from(merged.at("pipeline"), model_from(merged.at("model")));
}

RunConfig run_config_from_json(const nlohmann::json& doc) {
  const json merged = overlay(to_json(RunConfig{}), doc, "");
  RunConfig c;
  c.data = data_from(merged.at("data"));
  c.pipeline = pipeline_from(merged.at("pipeline"), model_from(merged.at("model")));
  c.scenario = scenario_from(merged.at("scenario"));
  c.output = output_from(merged.at("output"));
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(doc);
}

}  // namespace chaosode
