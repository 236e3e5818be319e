#pragma once

/// \file optimize.hpp
/// Particle swarm, CMA-ES and quasi-Newton minimizers.
///
/// Population methods treat any objective value >= `penalty` as infeasible:
/// such candidates never become a best point and rank behind every feasible
/// candidate. Evaluations within one generation may run on several threads;
/// results are reduced by candidate index, so the outcome does not depend on
/// scheduling.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace chaosode {

using Objective = std::function<double(std::span<const double>)>;

/// Returns false when x is infeasible (no value, no gradient).
using ObjectiveWithGradient = std::function<bool(std::span<const double> x, double& f, std::span<double> grad)>;

struct OptimizerReport {
  std::vector<double> best_params;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t evals = 0;
  bool converged = false;
  double wall_time = 0.0;
  std::vector<double> history;  // best-so-far after each iteration
};

struct PsoConfig {
  std::size_t swarm = 40;
  std::size_t iters = 300;
  double inertia = 0.72;
  double c1 = 1.49;
  double c2 = 1.49;
  std::vector<double> init_center;
  /// Per-coordinate spread; empty means 0.5*|center_j| + 0.1.
  std::vector<double> init_spread;
  /// Velocity clamp as a multiple of the spread.
  double vmax_factor = 1.0;
  std::uint64_t seed = 0;
  double penalty = 1e12;
  std::size_t workers = 1;
};

struct CmaesConfig {
  double sigma0 = 0.3;
  /// 0 selects 4 + floor(3 ln d).
  std::size_t popsize = 0;
  std::size_t max_evals = 20000;
  std::size_t max_iters = 0;  // 0: bounded by max_evals only
  std::uint64_t seed = 0;
  std::vector<double> x0;
  double f_target = -std::numeric_limits<double>::infinity();
  double tol_fun = 1e-15;
  double tol_x = 1e-15;
  /// Above this dimension the covariance is kept diagonal (separable CMA-ES).
  std::size_t full_covariance_max_dim = 200;
  double penalty = 1e12;
  std::size_t workers = 1;
};

struct QuasiNewtonConfig {
  std::size_t max_iters = 500;
  double grad_tol = 1e-10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  std::size_t max_line_search_evals = 40;
  /// Above this dimension use L-BFGS with `lbfgs_memory` pairs.
  std::size_t dense_max_dim = 500;
  std::size_t lbfgs_memory = 10;
  /// Stop after this many consecutive iterations with relative decrease below `f_rel_tol`.
  double f_rel_tol = 0.0;
  std::size_t stall_iters = 5;
};

OptimizerReport pso_minimize(const Objective& objective, std::size_t dim, const PsoConfig& config);

OptimizerReport cmaes_minimize(const Objective& objective, std::size_t dim, const CmaesConfig& config);

/// BFGS (L-BFGS above dense_max_dim) with a strong-Wolfe line search.
/// Infeasible trial points count as +inf and shrink the step.
/// Throws StalledAtInfeasible if x0 itself is infeasible.
OptimizerReport quasi_newton_minimize(const ObjectiveWithGradient& objective, std::span<const double> x0,
                                      const QuasiNewtonConfig& config);

/// Evaluates fn(i) for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace chaosode
