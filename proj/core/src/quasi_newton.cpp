#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "chaosode/errors.hpp"
#include "chaosode/optimize.hpp"

namespace chaosode {

namespace {

using Vec = Eigen::VectorXd;

struct Point {
  double alpha = 0.0;
  double f = std::numeric_limits<double>::infinity();
  double dphi = 0.0;
  Vec x, g;
  bool feasible = false;
};

class LineSearch {
 public:
  LineSearch(const ObjectiveWithGradient& objective, const QuasiNewtonConfig& config, std::size_t& evals)
      : objective_(objective), config_(config), evals_(evals) {}

  // Strong-Wolfe search along p from (x, f0, g0). Falls back to the best
  // point satisfying sufficient decrease when the budget runs out.
  std::optional<Point> search(const Vec& x, double f0, const Vec& g0, const Vec& p, double alpha_init) {
    x_ = &x;
    p_ = &p;
    f0_ = f0;
    dphi0_ = g0.dot(p);
    budget_ = config_.max_line_search_evals;
    best_ = std::nullopt;

    Point prev;
    prev.alpha = 0.0;
    prev.f = f0;
    prev.dphi = dphi0_;
    prev.feasible = true;
    double alpha = alpha_init;
    for (std::size_t i = 0; budget_ > 0; ++i) {
      Point cur = probe(alpha);
      if (!cur.feasible || cur.f > f0_ + config_.wolfe_c1 * alpha * dphi0_ || (i > 0 && cur.f >= prev.f))
        return zoom(prev, cur);
      if (std::abs(cur.dphi) <= -config_.wolfe_c2 * dphi0_) return cur;
      if (cur.dphi >= 0.0) return zoom(cur, prev);
      prev = cur;
      alpha *= 2.0;
    }
    return best_;
  }

 private:
  Point probe(double alpha) {
    Point pt;
    pt.alpha = alpha;
    pt.x = *x_ + alpha * *p_;
    pt.g.resize(pt.x.size());
    double f = 0.0;
    --budget_;
    ++evals_;
    pt.feasible = objective_(std::span<const double>(pt.x.data(), static_cast<std::size_t>(pt.x.size())), f,
                             std::span<double>(pt.g.data(), static_cast<std::size_t>(pt.g.size()))) &&
                  std::isfinite(f) && pt.g.allFinite();
    if (pt.feasible) {
      pt.f = f;
      pt.dphi = pt.g.dot(*p_);
      if (pt.f <= f0_ + config_.wolfe_c1 * alpha * dphi0_ && (!best_ || pt.f < best_->f)) best_ = pt;
    }
    return pt;
  }

  std::optional<Point> zoom(Point lo, Point hi) {
    while (budget_ > 0) {
      const double a = lo.alpha;
      const double b = hi.alpha;
      double trial = 0.5 * (a + b);
      if (hi.feasible) {
        // Cubic interpolation through both end points.
        const double d1 = lo.dphi + hi.dphi - 3.0 * (lo.f - hi.f) / (a - b);
        const double disc = d1 * d1 - lo.dphi * hi.dphi;
        if (disc >= 0.0) {
          const double d2 = std::copysign(std::sqrt(disc), b - a);
          const double c = b - (b - a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
          if (std::isfinite(c)) trial = c;
        }
      }
      const double left = std::min(a, b);
      const double right = std::max(a, b);
      const double margin = 0.1 * (right - left);
      trial = std::clamp(trial, left + margin, right - margin);
      if (right - left < 1e-16 * std::max(1.0, right)) break;

      Point cur = probe(trial);
      if (!cur.feasible || cur.f > f0_ + config_.wolfe_c1 * trial * dphi0_ || cur.f >= lo.f) {
        hi = cur;
      } else {
        if (std::abs(cur.dphi) <= -config_.wolfe_c2 * dphi0_) return cur;
        if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = cur;
      }
    }
    return best_;
  }

  const ObjectiveWithGradient& objective_;
  const QuasiNewtonConfig& config_;
  std::size_t& evals_;
  const Vec* x_ = nullptr;
  const Vec* p_ = nullptr;
  double f0_ = 0.0;
  double dphi0_ = 0.0;
  std::size_t budget_ = 0;
  std::optional<Point> best_;
};

// Inverse-Hessian approximation: dense BFGS or L-BFGS two-loop recursion.
class InverseHessian {
 public:
  InverseHessian(Eigen::Index n, bool dense, std::size_t memory) : n_(n), dense_(dense), memory_(memory) {
    reset();
  }

  void reset() {
    scaled_ = false;
    if (dense_) h_ = Eigen::MatrixXd::Identity(n_, n_);
    s_.clear();
    y_.clear();
    gamma_ = 1.0;
  }

  Vec direction(const Vec& g) const {
    if (dense_) return -(h_ * g);
    Vec q = g;
    std::vector<double> a(s_.size());
    for (std::size_t i = s_.size(); i-- > 0;) {
      a[i] = s_[i].dot(q) / y_[i].dot(s_[i]);
      q -= a[i] * y_[i];
    }
    Vec r = gamma_ * q;
    for (std::size_t i = 0; i < s_.size(); ++i) {
      const double b = y_[i].dot(r) / y_[i].dot(s_[i]);
      r += s_[i] * (a[i] - b);
    }
    return -r;
  }

  bool scaled() const { return scaled_; }

  void update(const Vec& s, const Vec& y) {
    const double sy = s.dot(y);
    if (!(sy > 1e-12 * s.norm() * y.norm())) return;
    const double yy = y.squaredNorm();
    if (dense_) {
      if (!scaled_) h_ = (sy / yy) * Eigen::MatrixXd::Identity(n_, n_);
      const double rho = 1.0 / sy;
      const Vec hy = h_ * y;
      const double yhy = y.dot(hy);
      h_ += ((1.0 + rho * yhy) * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    } else {
      s_.push_back(s);
      y_.push_back(y);
      if (s_.size() > memory_) {
        s_.pop_front();
        y_.pop_front();
      }
      gamma_ = sy / yy;
    }
    scaled_ = true;
  }

 private:
  Eigen::Index n_;
  bool dense_;
  std::size_t memory_;
  bool scaled_ = false;
  Eigen::MatrixXd h_;
  std::deque<Vec> s_, y_;
  double gamma_ = 1.0;
};

}  // namespace

OptimizerReport quasi_newton_minimize(const ObjectiveWithGradient& objective, std::span<const double> x0,
                                      const QuasiNewtonConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<Eigen::Index>(x0.size());
  OptimizerReport report;
  Vec x = Eigen::Map<const Vec>(x0.data(), n);
  Vec g(n);
  double f = 0.0;
  report.evals = 1;
  if (!objective(x0, f, std::span<double>(g.data(), x0.size())) || !std::isfinite(f) || !g.allFinite())
    throw StalledAtInfeasible();

  auto finish = [&] {
    report.best_params.assign(x.data(), x.data() + n);
    report.best_loss = f;
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
  };
  report.history.push_back(f);
  if (g.lpNorm<Eigen::Infinity>() < config.grad_tol) {
    report.converged = true;
    return finish();
  }

  InverseHessian hess(n, x0.size() <= config.dense_max_dim, config.lbfgs_memory);
  LineSearch ls(objective, config, report.evals);
  std::size_t stalled = 0;
  for (std::size_t k = 0; k < config.max_iters; ++k) {
    Vec p = hess.direction(g);
    bool steepest = false;
    if (!(g.dot(p) < 0.0)) {
      hess.reset();
      p = -g;
      steepest = true;
    }
    double alpha0 = hess.scaled() ? 1.0 : std::min(1.0, 1.0 / g.norm());
    auto step = ls.search(x, f, g, p, alpha0);
    if (!step && !steepest) {
      hess.reset();
      p = -g;
      alpha0 = std::min(1.0, 1.0 / g.norm());
      step = ls.search(x, f, g, p, alpha0);
    }
    if (!step) break;
    const Vec s = step->x - x;
    const Vec y = step->g - g;
    const double f_old = f;
    x = step->x;
    g = step->g;
    f = step->f;
    hess.update(s, y);
    ++report.iterations;
    report.history.push_back(f);
    if (g.lpNorm<Eigen::Infinity>() < config.grad_tol) {
      report.converged = true;
      break;
    }
    if (config.f_rel_tol > 0.0) {
      stalled = (f_old - f) <= config.f_rel_tol * std::max(std::abs(f), 1e-300) ? stalled + 1 : 0;
      if (stalled >= config.stall_iters) break;
    }
  }
  return finish();
}

}  // namespace chaosode
