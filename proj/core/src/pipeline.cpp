#include "chaosode/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "chaosode/errors.hpp"
#include "chaosode/json_io.hpp"
#include "chaosode/kernel.hpp"
#include "chaosode/loss.hpp"
#include "chaosode/neural.hpp"

namespace chaosode {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Least squares with a Tikhonov term, solved on the stacked system so the
// normal equations' squared conditioning is avoided.
Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double ridge) {
  if (ridge <= 0.0) return a.colPivHouseholderQr().solve(b);
  const Eigen::Index m = a.rows(), k = a.cols();
  const double scale = a.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(m, 1));
  Eigen::MatrixXd stacked(m + k, k);
  stacked.topRows(m) = a;
  stacked.bottomRows(k) = std::sqrt(ridge * scale) * Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m + k, b.cols());
  rhs.topRows(m) = b;
  return stacked.colPivHouseholderQr().solve(rhs);
}

std::vector<double> fit_network(const MlpRhs& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& dx,
                                const InitConfig& config, std::uint64_t seed) {
  std::vector<double> params = mlp_init(net.spec(), seed);
  const std::size_t n = net.state_dim();
  const auto rows = static_cast<std::size_t>(x.rows());
  const double scale = 2.0 / static_cast<double>(rows * n);
  std::vector<double> grad(params.size()), xi(n), fi(n), w(n), gx(n);
  std::vector<double> best = params;
  double best_mse = field_mse(net, params, x, dx);
  for (std::size_t step = 0; step < config.neural_steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n; ++j) xi[j] = x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
      net.eval(std::span<const double>(params), std::span<const double>(xi), std::span<double>(fi));
      for (std::size_t j = 0; j < n; ++j)
        w[j] = scale * (fi[j] - dx(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
      net.vjp(params, xi, w, gx, grad);
    }
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= config.neural_learning_rate * grad[k];
    const double mse = field_mse(net, params, x, dx);
    if (!std::isfinite(mse)) break;
    if (mse < best_mse) {
      best_mse = mse;
      best = params;
    }
  }
  return best;
}

double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

nlohmann::json stage_to_json(const StageReport& s) {
  return {{"name", s.name},
          {"status", s.status},
          {"message", s.message},
          {"start_loss", finite_or_null(s.start_loss)},
          {"end_loss", finite_or_null(s.end_loss)},
          {"single_loss", finite_or_null(s.single_loss)},
          {"iterations", s.iterations},
          {"evals", s.evals}};
}

StageReport stage_from_json(const nlohmann::json& j) {
  StageReport s;
  s.name = j.at("name").get<std::string>();
  s.status = j.at("status").get<std::string>();
  s.message = j.at("message").get<std::string>();
  s.start_loss = number_or_inf(j.at("start_loss"));
  s.end_loss = number_or_inf(j.at("end_loss"));
  s.single_loss = number_or_inf(j.at("single_loss"));
  s.iterations = j.at("iterations").get<std::size_t>();
  s.evals = j.at("evals").get<std::size_t>();
  return s;
}

}  // namespace

void PipelineConfig::validate() const {
  if (segment_size < 2) throw ConfigError("pipeline.segment_size must be >= 2");
  if (!(continuity_weight >= 0.0)) throw ConfigError("pipeline.continuity_weight must be >= 0");
  if (!(penalty > 0.0)) throw ConfigError("pipeline.penalty must be positive");
  if (step.substeps == 0 && !(step.h_max > 0.0)) throw ConfigError("pipeline.step.h_max must be positive");
  if (pso.swarm < 2) throw ConfigError("pipeline.pso.swarm must be >= 2");
  if (!(cmaes.sigma0 > 0.0)) throw ConfigError("pipeline.cmaes.sigma0 must be positive");
  if (model.n_max < 1) throw ConfigError("model.n_max must be >= 1");
  if (model.pilots_per_dim < 2) throw ConfigError("model.pilots_per_dim must be >= 2");
  if (!(model.kernel_lambda >= 0.0)) throw ConfigError("model.kernel_lambda must be >= 0");
  if (!(init.surrogate_lambda >= 0.0)) throw ConfigError("init.surrogate_lambda must be >= 0");
  if (!(init.ridge >= 0.0)) throw ConfigError("init.ridge must be >= 0");
  if (!(init.pretrain_ridge >= 0.0)) throw ConfigError("init.pretrain_ridge must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  try {
    if (model.kind == RhsKind::neural) MlpSpec{model.widths}.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model.widths: ") + e.what());
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RhsPtr build_rhs(const ModelConfig& config, const Eigen::MatrixXd& build_states) {
  const auto n = static_cast<std::size_t>(build_states.cols());
  switch (config.kind) {
    case RhsKind::chaos:
      return std::make_shared<ChaosRhs>(config.basis_variant == BasisVariant::orthonormal
                                            ? build_basis(build_states, config.n_max)
                                            : monomial_basis(n, config.n_max));
    case RhsKind::kernel: {
      Eigen::MatrixXd pilots = grid_pilots(build_states, config.pilots_per_dim, config.pilot_inflate);
      const double l = config.kernel_lengthscale > 0.0 ? config.kernel_lengthscale : median_pairwise_distance(pilots);
      return std::make_shared<KernelRhs>(KernelSpec{l, config.kernel_lambda}, std::move(pilots));
    }
    case RhsKind::neural: {
      MlpSpec spec{config.widths};
      if (spec.layer_widths.front() != n || spec.layer_widths.back() != n)
        throw ConfigError("model.widths must start and end with the state dimension");
      return std::make_shared<MlpRhs>(std::move(spec));
    }
  }
  throw std::logic_error("build_rhs: unknown kind");
}

double field_mse(const RhsModel& rhs, std::span<const double> params, const Eigen::MatrixXd& x,
                 const Eigen::MatrixXd& dx) {
  const std::size_t n = rhs.state_dim();
  const auto coeffs = rhs.coefficients(params);
  std::vector<double> xi(n), fi(n);
  double sse = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < n; ++j) xi[j] = x(r, static_cast<Eigen::Index>(j));
    rhs.eval(std::span<const double>(coeffs), std::span<const double>(xi), std::span<double>(fi));
    for (std::size_t j = 0; j < n; ++j) {
      const double e = fi[j] - dx(r, static_cast<Eigen::Index>(j));
      sse += e * e;
    }
  }
  return sse / static_cast<double>(static_cast<std::size_t>(x.rows()) * n);
}

std::vector<double> fit_field(const RhsModel& rhs, const Eigen::MatrixXd& x, const Eigen::MatrixXd& dx,
                              const InitConfig& config, std::uint64_t seed) {
  if (x.rows() != dx.rows() || static_cast<std::size_t>(x.cols()) != rhs.state_dim() || x.cols() != dx.cols())
    throw std::invalid_argument("fit_field: shape mismatch");
  const std::size_t n = rhs.state_dim();
  if (const auto* chaos = dynamic_cast<const ChaosRhs*>(&rhs)) {
    const Eigen::MatrixXd theta = ridge_solve(chaos->basis().design_matrix(x), dx, config.ridge);  // M x n
    std::vector<double> params(rhs.param_count());
    const auto m = static_cast<std::size_t>(theta.rows());
    for (std::size_t d = 0; d < n; ++d)
      for (std::size_t p = 0; p < m; ++p)
        params[d * m + p] = theta(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d));
    return params;
  }
  if (const auto* kern = dynamic_cast<const KernelRhs*>(&rhs)) {
    const Eigen::MatrixXd& pilots = kern->pilots();
    Eigen::MatrixXd features(x.rows(), pilots.rows());
    std::vector<double> a(n), b(n);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index i = 0; i < pilots.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          a[j] = x(r, static_cast<Eigen::Index>(j));
          b[j] = pilots(i, static_cast<Eigen::Index>(j));
        }
        features(r, i) = kernel_eval(kern->spec(), a, b);
      }
    const Eigen::MatrixXd c = ridge_solve(features, dx, config.ridge);  // P x n
    const Eigen::MatrixXd theta = kern->system_matrix() * c;
    std::vector<double> params(rhs.param_count());
    for (Eigen::Index i = 0; i < theta.rows(); ++i)
      for (std::size_t d = 0; d < n; ++d)
        params[static_cast<std::size_t>(i) * n + d] = theta(i, static_cast<Eigen::Index>(d));
    return params;
  }
  if (const auto* net = dynamic_cast<const MlpRhs*>(&rhs)) return fit_network(*net, x, dx, config, seed);
  throw std::invalid_argument("fit_field: unsupported model");
}

std::vector<double> estimate_initial_params(const ObservationSet& data, const RhsModel& rhs,
                                            const InitConfig& config, std::uint64_t seed) {
  const std::size_t m = data.size();
  if (m < 4) throw std::invalid_argument("estimate_initial_params: need at least 4 observations");
  double l = 0.0;
  if (config.surrogate_spacing_factor > 0.0) {
    l = config.surrogate_spacing_factor * (data.times.back() - data.times.front()) / static_cast<double>(m - 1);
  } else {
    const Eigen::Map<const Eigen::VectorXd> t(data.times.data(), static_cast<Eigen::Index>(m));
    l = median_pairwise_distance(t);
  }
  const auto surrogate = fit_time_surrogate(data.times, data.states, KernelSpec{l, config.surrogate_lambda});
  const std::size_t n = data.dim();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  Eigen::MatrixXd dx(x.rows(), x.cols());
  for (std::size_t i = 0; i < m; ++i) {
    const auto v = surrogate.value(data.times[i]);
    const auto d = surrogate.derivative(data.times[i]);
    for (std::size_t j = 0; j < n; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
      dx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d[j];
    }
  }
  return fit_field(rhs, x, dx, config, seed);
}

std::vector<double> pretrain_perfect_information(const RhsModel& rhs, const TrueField& field,
                                                 const std::vector<std::pair<double, double>>& region,
                                                 std::size_t per_dim, const InitConfig& config,
                                                 std::uint64_t seed) {
  if (region.size() != rhs.state_dim()) throw std::invalid_argument("pretrain: region dimension mismatch");
  for (const auto& [lo, hi] : region)
    if (!(hi > lo)) throw std::invalid_argument("pretrain: degenerate region");
  const Eigen::MatrixXd x = grid_points(region, per_dim);
  Eigen::MatrixXd dx(x.rows(), x.cols());
  std::vector<double> xi(static_cast<std::size_t>(x.cols())), fi(xi.size());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < xi.size(); ++j) xi[j] = x(r, static_cast<Eigen::Index>(j));
    field(xi, fi);
    for (std::size_t j = 0; j < xi.size(); ++j) dx(r, static_cast<Eigen::Index>(j)) = fi[j];
  }
  InitConfig exact = config;
  exact.ridge = config.pretrain_ridge;
  return fit_field(rhs, x, dx, exact, seed);
}

TrainedModel train(const ObservationSet& data, const PipelineConfig& config) {
  config.validate();
  const auto start = Clock::now();
  RhsPtr rhs = build_rhs(config.model, data.states);
  auto params = estimate_initial_params(data, *rhs, config.init, derive_seed(config.seed, 0));
  const double init_seconds = seconds_since(start);
  auto model = train_from(data, std::move(rhs), std::move(params), config);
  model.stages.front().name = "init";
  model.stages.front().seconds += init_seconds;
  return model;
}

TrainedModel train_from(const ObservationSet& data, RhsPtr rhs, std::vector<double> initial_params,
                        const PipelineConfig& config) {
  config.validate();
  if (data.size() < 4) throw std::invalid_argument("train: need at least 4 observations");
  if (initial_params.size() != rhs->param_count()) throw std::invalid_argument("train: parameter count mismatch");

  LossSpec single_spec;
  single_spec.mode = ShootingMode::single;
  single_spec.continuity_weight = config.continuity_weight;
  single_spec.step = config.step;
  single_spec.divergence.penalty_loss = config.penalty;
  LossSpec multiple_spec = single_spec;
  multiple_spec.mode = ShootingMode::multiple;
  multiple_spec.plan = segment_grid(data.size(), config.segment_size);
  const ShootingLoss single(rhs, data, single_spec);
  const ShootingLoss multiple(rhs, data, multiple_spec);

  TrainedModel model;
  model.rhs = rhs;
  model.seed = config.seed;
  std::vector<double> current = std::move(initial_params);
  // Outputs with a feasible single-shooting loss, oldest first.
  std::vector<std::vector<double>> feasible;

  {
    const auto t = Clock::now();
    StageReport init{"pretrained", "ok", "", 0, 0, 0, 0, 1, 0};
    init.start_loss = init.end_loss = init.single_loss = single.value(current);
    init.seconds = seconds_since(t);
    if (init.single_loss < config.penalty) feasible.push_back(current);
    model.stages.push_back(init);
  }

  const auto value_of = [](const ShootingLoss& loss) {
    return [&loss](std::span<const double> p) { return loss.value(p); };
  };
  const auto value_and_grad = [](const ShootingLoss& loss) {
    return [&loss](std::span<const double> p, double& f, std::span<double> g) {
      return loss.value_and_gradient(p, f, g);
    };
  };

  const auto run_stage = [&](const std::string& name, bool enabled, const ShootingLoss& objective,
                             const std::function<OptimizerReport(const std::vector<double>&)>& body) {
    StageReport report;
    report.name = name;
    const auto t = Clock::now();
    report.start_loss = objective.value(current);
    report.end_loss = report.start_loss;
    if (!enabled) {
      report.status = "disabled";
    } else {
      try {
        const OptimizerReport r = body(current);
        report.iterations = r.iterations;
        report.evals = r.evals;
        if (r.best_loss >= config.penalty || !std::isfinite(r.best_loss)) {
          report.status = "failed";
          report.message = "no feasible candidate";
        } else {
          report.status = "ok";
          report.end_loss = r.best_loss;
          current = r.best_params;
        }
      } catch (const Error& e) {
        report.status = "failed";
        report.message = e.what();
      }
    }
    report.single_loss = single.value(current);
    if (report.status == "ok" && report.single_loss < config.penalty) feasible.push_back(current);
    report.seconds = seconds_since(t);
    model.stages.push_back(report);
  };

  run_stage("pso_single", config.run_pso, single, [&](const std::vector<double>& x0) {
    PsoConfig cfg = config.pso;
    cfg.init_center = x0;
    cfg.seed = derive_seed(config.seed, 1);
    cfg.penalty = config.penalty;
    cfg.workers = config.workers;
    return pso_minimize(value_of(single), x0.size(), cfg);
  });
  run_stage("cmaes_multiple", config.run_cmaes, multiple, [&](const std::vector<double>& x0) {
    CmaesConfig cfg = config.cmaes;
    cfg.x0 = x0;
    cfg.sigma0 = config.cmaes.sigma0 * std::max(rms(x0), 1e-2);
    cfg.seed = derive_seed(config.seed, 2);
    cfg.penalty = config.penalty;
    cfg.workers = config.workers;
    return cmaes_minimize(value_of(multiple), x0.size(), cfg);
  });
  run_stage("qn_multiple", config.run_qn_multiple, multiple, [&](const std::vector<double>& x0) {
    return quasi_newton_minimize(value_and_grad(multiple), x0, config.qn_multiple);
  });
  run_stage("qn_single", config.run_qn_single, single, [&](const std::vector<double>& x0) {
    return quasi_newton_minimize(value_and_grad(single), x0, config.qn_single);
  });

  double final_loss = single.value(current);
  if (!(final_loss < config.penalty)) {
    if (feasible.empty()) throw AllStagesFailed();
    current = feasible.back();
    final_loss = single.value(current);
  }
  model.params = std::move(current);
  model.final_loss = final_loss;
  return model;
}

nlohmann::json to_json(const TrainedModel& model) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : model.stages) stages.push_back(stage_to_json(s));
  return {{"kind", to_string(model.rhs->kind())},
          {"model", model.rhs->to_json()},
          {"params", model.params},
          {"final_loss", finite_or_null(model.final_loss)},
          {"seed", model.seed},
          {"stages", stages}};
}

TrainedModel trained_model_from_json(const nlohmann::json& doc) {
  TrainedModel model;
  model.rhs = load_rhs(doc.at("model"));
  model.params = doc.at("params").get<std::vector<double>>();
  if (model.params.size() != model.rhs->param_count())
    throw std::invalid_argument("trained model: parameter count mismatch");
  model.final_loss = number_or_inf(doc.at("final_loss"));
  model.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& s : doc.at("stages")) model.stages.push_back(stage_from_json(s));
  return model;
}

std::string stage_table(const TrainedModel& model) {
  std::string out = "stage            status    start_loss    end_loss      evals     seconds\n";
  char line[256];
  for (const auto& s : model.stages) {
    std::snprintf(line, sizeof line, "%-16s %-9s %-13.6e %-13.6e %-9zu %.3f\n", s.name.c_str(), s.status.c_str(),
                  s.start_loss, s.end_loss, s.evals, s.seconds);
    out += line;
  }
  return out;
}

}  // namespace chaosode
