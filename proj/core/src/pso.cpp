#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "chaosode/optimize.hpp"

namespace chaosode {

OptimizerReport pso_minimize(const Objective& objective, std::size_t dim, const PsoConfig& config) {
  if (config.swarm < 2) throw std::invalid_argument("pso: swarm must be >= 2");
  if (config.init_center.size() != dim) throw std::invalid_argument("pso: init_center dimension mismatch");
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> spread = config.init_spread;
  if (spread.empty()) {
    spread.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) spread[j] = 0.5 * std::abs(config.init_center[j]) + 0.1;
  }
  if (spread.size() != dim) throw std::invalid_argument("pso: init_spread dimension mismatch");

  const std::size_t m = config.swarm;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> pos(m, config.init_center), vel(m, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      // Particle 0 sits on the centre so the swarm never starts worse than it.
      if (i > 0) pos[i][j] += spread[j] * sym(rng);
      vel[i][j] = 0.5 * spread[j] * sym(rng);
    }
  std::vector<std::vector<double>> pbest = pos;
  std::vector<double> pbest_f(m, std::numeric_limits<double>::infinity());
  std::vector<double> f(m);

  OptimizerReport report;
  report.best_params = config.init_center;
  bool have_feasible = false;

  auto evaluate = [&] {
    parallel_for(m, config.workers, [&](std::size_t i) { f[i] = objective(pos[i]); });
    report.evals += m;
    for (std::size_t i = 0; i < m; ++i) {
      const bool feasible = std::isfinite(f[i]) && f[i] < config.penalty;
      if (feasible && f[i] < pbest_f[i]) {
        pbest_f[i] = f[i];
        pbest[i] = pos[i];
      }
      if (feasible && (!have_feasible || f[i] < report.best_loss)) {
        report.best_loss = f[i];
        report.best_params = pos[i];
        have_feasible = true;
      }
    }
  };

  evaluate();
  if (!have_feasible) report.best_loss = std::isfinite(f[0]) ? f[0] : config.penalty;
  report.history.push_back(report.best_loss);

  for (std::size_t it = 0; it < config.iters; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      const auto& attractor = have_feasible ? report.best_params : config.init_center;
      const bool has_pbest = std::isfinite(pbest_f[i]);
      for (std::size_t j = 0; j < dim; ++j) {
        const double r1 = unit(rng);
        const double r2 = unit(rng);
        double v = config.inertia * vel[i][j] + config.c2 * r2 * (attractor[j] - pos[i][j]);
        if (has_pbest) v += config.c1 * r1 * (pbest[i][j] - pos[i][j]);
        const double vmax = config.vmax_factor * spread[j];
        vel[i][j] = std::clamp(v, -vmax, vmax);
        pos[i][j] += vel[i][j];
      }
    }
    evaluate();
    ++report.iterations;
    report.history.push_back(report.best_loss);
  }
  report.converged = have_feasible;
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace chaosode
