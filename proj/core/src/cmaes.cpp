#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "chaosode/optimize.hpp"

namespace chaosode {

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation, rank-one and
// rank-mu covariance updates. Above `full_covariance_max_dim` the covariance
// is restricted to its diagonal with the learning rates scaled by (d+2)/3.
OptimizerReport cmaes_minimize(const Objective& objective, std::size_t dim, const CmaesConfig& config) {
  if (!(config.sigma0 > 0.0)) throw std::invalid_argument("cmaes: sigma0 must be positive");
  if (config.x0.size() != dim) throw std::invalid_argument("cmaes: x0 dimension mismatch");
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<Eigen::Index>(dim);
  const double nd = static_cast<double>(dim);
  const bool separable = dim > config.full_covariance_max_dim;

  const std::size_t lambda = config.popsize > 0 ? config.popsize
                                                : 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(nd)));
  const std::size_t mu = lambda / 2;
  Eigen::VectorXd weights(static_cast<Eigen::Index>(mu));
  for (std::size_t i = 0; i < mu; ++i)
    weights(static_cast<Eigen::Index>(i)) = std::log(static_cast<double>(mu) + 0.5) - std::log(static_cast<double>(i + 1));
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();

  const double cc = (4.0 + mueff / nd) / (nd + 4.0 + 2.0 * mueff / nd);
  const double cs = (mueff + 2.0) / (nd + mueff + 5.0);
  double c1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mueff);
  double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nd + 2.0) * (nd + 2.0) + mueff));
  if (separable) {
    const double scale = (nd + 2.0) / 3.0;
    c1 = std::min(1.0, c1 * scale);
    cmu = std::min(1.0 - c1, cmu * scale);
  }
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (nd + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(config.x0.data(), n);
  double sigma = config.sigma0;
  Eigen::VectorXd pc = Eigen::VectorXd::Zero(n), ps = Eigen::VectorXd::Zero(n);
  // Full mode: C = B diag(D^2) B^T. Separable mode: C = diag(D^2), B unused.
  Eigen::MatrixXd cov, basis;
  if (!separable) {
    cov = Eigen::MatrixXd::Identity(n, n);
    basis = Eigen::MatrixXd::Identity(n, n);
  }
  Eigen::VectorXd diag_c = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd dvec = Eigen::VectorXd::Ones(n);
  std::size_t eigen_gen = 0;
  const std::size_t eigen_interval = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(lambda) / ((c1 + cmu) * nd * 10.0)));

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  OptimizerReport report;
  report.best_params = config.x0;
  report.best_loss = objective(config.x0);
  report.evals = 1;
  if (!std::isfinite(report.best_loss)) report.best_loss = config.penalty;
  report.history.push_back(report.best_loss);

  std::vector<std::vector<double>> xs(lambda, std::vector<double>(dim));
  Eigen::MatrixXd zs(n, static_cast<Eigen::Index>(lambda)), ys(n, static_cast<Eigen::Index>(lambda));
  std::vector<double> fs(lambda);
  std::vector<std::size_t> order(lambda);
  std::deque<double> recent_best;
  const std::size_t hist_len = 10 + static_cast<std::size_t>(std::ceil(30.0 * nd / static_cast<double>(lambda)));

  for (std::size_t gen = 0;; ++gen) {
    if (report.evals + lambda > config.max_evals && gen > 0) break;
    if (config.max_iters > 0 && gen >= config.max_iters) break;
    for (std::size_t k = 0; k < lambda; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) zs(i, static_cast<Eigen::Index>(k)) = normal(rng);
      Eigen::VectorXd y = dvec.cwiseProduct(zs.col(static_cast<Eigen::Index>(k)));
      if (!separable) y = basis * y;
      ys.col(static_cast<Eigen::Index>(k)) = y;
      Eigen::Map<Eigen::VectorXd>(xs[k].data(), n) = mean + sigma * y;
    }
    parallel_for(lambda, config.workers, [&](std::size_t k) {
      const double v = objective(xs[k]);
      fs[k] = std::isfinite(v) ? v : config.penalty;
    });
    report.evals += lambda;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    const std::size_t top = order[0];
    if (fs[top] < config.penalty && fs[top] < report.best_loss) {
      report.best_loss = fs[top];
      report.best_params = xs[top];
    }
    ++report.iterations;
    report.history.push_back(report.best_loss);

    // Recombination.
    const Eigen::VectorXd old_mean = mean;
    Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < mu; ++i) y_w += weights(static_cast<Eigen::Index>(i)) * ys.col(static_cast<Eigen::Index>(order[i]));
    mean = old_mean + sigma * y_w;

    // Step-size path uses C^{-1/2} y_w = B D^{-1} B^T y_w.
    Eigen::VectorXd c_inv_half_y;
    if (separable) {
      c_inv_half_y = y_w.cwiseQuotient(dvec);
    } else {
      c_inv_half_y = basis * (basis.transpose() * y_w).cwiseQuotient(dvec);
    }
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * c_inv_half_y;
    const double ps_norm = ps.norm();
    const double hsig_den = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * static_cast<double>(gen + 1)));
    const bool hsig = ps_norm / hsig_den / chi_n < 1.4 + 2.0 / (nd + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;
    const double delta_h = hsig ? 0.0 : cc * (2.0 - cc);

    if (separable) {
      Eigen::VectorXd rank_mu = Eigen::VectorXd::Zero(n);
      for (std::size_t i = 0; i < mu; ++i)
        rank_mu += weights(static_cast<Eigen::Index>(i)) * ys.col(static_cast<Eigen::Index>(order[i])).cwiseAbs2();
      diag_c = (1.0 - c1 - cmu + c1 * delta_h) * diag_c + c1 * pc.cwiseAbs2() + cmu * rank_mu;
      dvec = diag_c.cwiseSqrt();
    } else {
      Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
      for (std::size_t i = 0; i < mu; ++i) {
        const auto y = ys.col(static_cast<Eigen::Index>(order[i]));
        rank_mu.noalias() += weights(static_cast<Eigen::Index>(i)) * y * y.transpose();
      }
      cov = (1.0 - c1 - cmu + c1 * delta_h) * cov + c1 * pc * pc.transpose() + cmu * rank_mu;
      if (gen + 1 - eigen_gen >= eigen_interval) {
        eigen_gen = gen + 1;
        cov = cov.triangularView<Eigen::Upper>();
        cov = cov.selfadjointView<Eigen::Upper>();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        if (es.info() != Eigen::Success) break;
        basis = es.eigenvectors();
        dvec = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt();
      }
    }
    sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));

    // Termination.
    if (report.best_loss <= config.f_target) {
      report.converged = true;
      break;
    }
    recent_best.push_back(fs[top]);
    if (recent_best.size() > hist_len) recent_best.pop_front();
    const double gen_range = fs[order[lambda - 1]] - fs[top];
    if (recent_best.size() == hist_len && fs[order[lambda - 1]] < config.penalty) {
      const auto [lo, hi] = std::minmax_element(recent_best.begin(), recent_best.end());
      if (std::max(*hi - *lo, gen_range) < config.tol_fun) {
        report.converged = true;
        break;
      }
    }
    if (sigma * dvec.maxCoeff() < config.tol_x) {
      report.converged = true;
      break;
    }
    if (!std::isfinite(sigma) || !mean.allFinite() || !dvec.allFinite()) break;
  }
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace chaosode
