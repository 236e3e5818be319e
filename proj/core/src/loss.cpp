#include "chaosode/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "chaosode/errors.hpp"

namespace chaosode {

ShootingLoss::ShootingLoss(RhsPtr rhs, const ObservationSet& data, LossSpec spec)
    : rhs_(std::move(rhs)), times_(data.times), n_(data.dim()), spec_(std::move(spec)) {
  if (!rhs_) throw std::invalid_argument("ShootingLoss: missing rhs");
  if (n_ != rhs_->state_dim()) throw std::invalid_argument("ShootingLoss: state dimension mismatch");
  if (data.x0.size() != n_) throw std::invalid_argument("ShootingLoss: x0 dimension mismatch");
  if (spec_.continuity_weight < 0.0) throw std::invalid_argument("ShootingLoss: negative continuity weight");
  const std::size_t m = times_.size();
  if (m < 2) throw std::invalid_argument("ShootingLoss: need at least two observations");
  if (times_.front() < data.t0) throw std::invalid_argument("ShootingLoss: observation before t0");
  obs_.resize(m * n_);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n_; ++c)
      obs_[r * n_ + c] = data.states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));

  if (spec_.mode == ShootingMode::single) {
    segments_.push_back(Segment{0, m - 1, data.x0, data.t0});
  } else {
    if (spec_.plan.segment_bounds.empty()) spec_.plan = segment_grid(m, m);
    if (!is_valid_plan(spec_.plan, m)) throw std::invalid_argument("ShootingLoss: invalid segment plan");
    for (const auto& [s, e] : spec_.plan.segment_bounds) {
      if (s == 0) {
        segments_.push_back(Segment{0, e, data.x0, data.t0});
      } else {
        std::vector<double> anchor(obs_.begin() + static_cast<std::ptrdiff_t>(s * n_),
                                   obs_.begin() + static_cast<std::ptrdiff_t>((s + 1) * n_));
        segments_.push_back(Segment{s + 1, e, std::move(anchor), times_[s]});
      }
    }
  }
  std::size_t predicted = 0;
  for (const auto& seg : segments_) predicted += seg.last + 1 - seg.first;
  sse_scale_ = 1.0 / static_cast<double>(predicted * n_);
}

template <class C, class S>
S ShootingLoss::primal(std::span<const C> coeffs) const {
  const RhsField<C> field{rhs_.get(), coeffs};
  S sse(0.0);
  S cont(0.0);
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const Segment& seg = segments_[k];
    std::vector<S> x0(seg.anchor.begin(), seg.anchor.end());
    const std::span<const double> ts(times_.data() + seg.first, seg.last + 1 - seg.first);
    const auto states = solve_generic<S>(field, std::span<const S>(x0), seg.t_anchor, ts, spec_.step);
    for (std::size_t r = 0; r < ts.size(); ++r)
      for (std::size_t c = 0; c < n_; ++c) {
        const S res = states[r * n_ + c] - obs_[(seg.first + r) * n_ + c];
        sse += res * res;
      }
    if (k + 1 < segments_.size()) {
      const std::size_t r = ts.size() - 1;
      for (std::size_t c = 0; c < n_; ++c) {
        const S gap = states[r * n_ + c] - segments_[k + 1].anchor[c];
        cont += gap * gap;
      }
    }
  }
  return sse * sse_scale_ + spec_.continuity_weight * cont;
}

double ShootingLoss::value(std::span<const double> params) const {
  if (params.size() != rhs_->param_count()) throw std::invalid_argument("loss: parameter length mismatch");
  const auto coeffs = rhs_->coefficients(params);
  try {
    const double f = primal<double, double>(std::span<const double>(coeffs));
    if (!std::isfinite(f)) return penalty();
    return f;
  } catch (const Diverged&) {
    return penalty();
  }
}

namespace {

struct AdjointWorkspace {
  explicit AdjointWorkspace(std::size_t n)
      : k1(n), k2(n), k3(n), u2(n), u3(n), u4(n), k1b(n), k2b(n), k3b(n), k4b(n), g(n), xbar(n) {}
  std::vector<double> k1, k2, k3, u2, u3, u4, k1b, k2b, k3b, k4b, g, xbar;
};

// Pulls lambda = dL/dx_{k+1} back through one RK4 step from x_k.
void step_adjoint(const RhsModel& rhs, std::span<const double> coeffs, std::span<const double> x, double h,
                  std::span<double> lambda, std::span<double> grad_coeffs, AdjointWorkspace& ws) {
  const std::size_t n = x.size();
  rhs.eval(coeffs, x, std::span<double>(ws.k1));
  for (std::size_t i = 0; i < n; ++i) ws.u2[i] = x[i] + 0.5 * h * ws.k1[i];
  rhs.eval(coeffs, std::span<const double>(ws.u2), std::span<double>(ws.k2));
  for (std::size_t i = 0; i < n; ++i) ws.u3[i] = x[i] + 0.5 * h * ws.k2[i];
  rhs.eval(coeffs, std::span<const double>(ws.u3), std::span<double>(ws.k3));
  for (std::size_t i = 0; i < n; ++i) ws.u4[i] = x[i] + h * ws.k3[i];

  for (std::size_t i = 0; i < n; ++i) {
    ws.xbar[i] = lambda[i];
    ws.k1b[i] = h / 6.0 * lambda[i];
    ws.k2b[i] = h / 3.0 * lambda[i];
    ws.k3b[i] = h / 3.0 * lambda[i];
    ws.k4b[i] = h / 6.0 * lambda[i];
  }
  rhs.vjp(coeffs, ws.u4, ws.k4b, ws.g, grad_coeffs);
  for (std::size_t i = 0; i < n; ++i) {
    ws.xbar[i] += ws.g[i];
    ws.k3b[i] += h * ws.g[i];
  }
  rhs.vjp(coeffs, ws.u3, ws.k3b, ws.g, grad_coeffs);
  for (std::size_t i = 0; i < n; ++i) {
    ws.xbar[i] += ws.g[i];
    ws.k2b[i] += 0.5 * h * ws.g[i];
  }
  rhs.vjp(coeffs, ws.u2, ws.k2b, ws.g, grad_coeffs);
  for (std::size_t i = 0; i < n; ++i) {
    ws.xbar[i] += ws.g[i];
    ws.k1b[i] += 0.5 * h * ws.g[i];
  }
  rhs.vjp(coeffs, x, ws.k1b, ws.g, grad_coeffs);
  for (std::size_t i = 0; i < n; ++i) lambda[i] = ws.xbar[i] + ws.g[i];
}

}  // namespace

double ShootingLoss::adjoint(std::span<const double> coeffs, std::span<double> grad_coeffs) const {
  const RhsField<double> field{rhs_.get(), coeffs};
  const RhsModel& rhs = *rhs_;
  Rk4Workspace<double> rk(n_);
  AdjointWorkspace ws(n_);
  std::vector<double> xs;      // states at step boundaries, row-major
  std::vector<double> hs;      // step sizes
  std::vector<long> output_at; // state index -> observation row (or -1)
  std::vector<double> lam_out(obs_.size(), 0.0);
  std::vector<double> lambda(n_);
  double sse = 0.0;
  double cont = 0.0;
  std::vector<double> seeds;  // d(loss)/d(state) per observation row, per segment

  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const Segment& seg = segments_[k];
    xs.assign(seg.anchor.begin(), seg.anchor.end());
    hs.clear();
    output_at.assign(1, -1);
    double t = seg.t_anchor;
    std::vector<double> x(seg.anchor);
    for (std::size_t r = seg.first; r <= seg.last; ++r) {
      const double dt = times_[r] - t;
      if (dt > 0.0) {
        const int steps = spec_.step.steps_for(dt);
        const double h = dt / steps;
        for (int s = 0; s < steps; ++s) {
          try {
            rk4_step<double>(field, std::span<const double>(x), h, std::span<double>(x), rk);
          } catch (const NonFinite&) {
            throw Diverged(t + s * h);
          }
          xs.insert(xs.end(), x.begin(), x.end());
          hs.push_back(h);
          output_at.push_back(-1);
        }
        t = times_[r];
      }
      output_at.back() = static_cast<long>(r);
    }
    // Residual seeds at outputs.
    seeds.assign((seg.last + 1 - seg.first) * n_, 0.0);
    for (std::size_t j = 0; j < output_at.size(); ++j) {
      if (output_at[j] < 0) continue;
      const auto r = static_cast<std::size_t>(output_at[j]);
      for (std::size_t c = 0; c < n_; ++c) {
        const double res = xs[j * n_ + c] - obs_[r * n_ + c];
        sse += res * res;
        seeds[(r - seg.first) * n_ + c] += 2.0 * sse_scale_ * res;
      }
    }
    if (k + 1 < segments_.size()) {
      const std::size_t j = output_at.size() - 1;
      for (std::size_t c = 0; c < n_; ++c) {
        const double gap = xs[j * n_ + c] - segments_[k + 1].anchor[c];
        cont += gap * gap;
        seeds[(seg.last - seg.first) * n_ + c] += 2.0 * spec_.continuity_weight * gap;
      }
    }
    // Backward sweep.
    std::fill(lambda.begin(), lambda.end(), 0.0);
    for (std::size_t j = hs.size(); j > 0; --j) {
      if (output_at[j] >= 0) {
        const auto r = static_cast<std::size_t>(output_at[j]);
        for (std::size_t c = 0; c < n_; ++c) lambda[c] += seeds[(r - seg.first) * n_ + c];
      }
      step_adjoint(rhs, coeffs, std::span<const double>(xs.data() + (j - 1) * n_, n_), hs[j - 1],
                   std::span<double>(lambda), grad_coeffs, ws);
    }
  }
  return sse * sse_scale_ + spec_.continuity_weight * cont;
}

bool ShootingLoss::value_and_gradient(std::span<const double> params, double& f, std::span<double> grad) const {
  if (params.size() != rhs_->param_count() || grad.size() != params.size())
    throw std::invalid_argument("gradient: parameter length mismatch");
  const auto coeffs = rhs_->coefficients(params);
  std::vector<double> grad_coeffs(coeffs.size(), 0.0);
  try {
    f = adjoint(std::span<const double>(coeffs), std::span<double>(grad_coeffs));
  } catch (const Diverged&) {
    f = penalty();
    return false;
  }
  if (!std::isfinite(f) || f >= penalty()) {
    f = penalty();
    return false;
  }
  rhs_->pullback(std::span<const double>(grad_coeffs), grad);
  for (double g : grad)
    if (!std::isfinite(g)) return false;
  return true;
}

std::vector<double> ShootingLoss::gradient(std::span<const double> params) const {
  std::vector<double> g(params.size());
  double f = 0.0;
  if (!value_and_gradient(params, f, std::span<double>(g))) throw DivergedNoGradient();
  return g;
}

std::vector<double> ShootingLoss::gradient_forward(std::span<const double> params) const {
  const std::size_t p = params.size();
  if (p != rhs_->param_count()) throw std::invalid_argument("gradient: parameter length mismatch");
  std::vector<double> grad(p, 0.0);
  std::vector<Dual8> dp(p), dc(rhs_->coeff_count());
  for (std::size_t start = 0; start < p; start += kDualWidth) {
    for (std::size_t i = 0; i < p; ++i) {
      dp[i] = Dual8(params[i]);
      if (i >= start && i < start + kDualWidth) dp[i].d[i - start] = 1.0;
    }
    rhs_->coefficients(std::span<const Dual8>(dp), std::span<Dual8>(dc));
    Dual8 f;
    try {
      f = primal<Dual8, Dual8>(std::span<const Dual8>(dc));
    } catch (const Diverged&) {
      throw DivergedNoGradient();
    }
    if (!is_finite(f)) throw DivergedNoGradient();
    for (std::size_t k = 0; k < kDualWidth && start + k < p; ++k) grad[start + k] = f.d[k];
  }
  return grad;
}

double loss(const ShootingLoss& spec, std::span<const double> params) { return spec.value(params); }

std::vector<double> gradient(const ShootingLoss& spec, std::span<const double> params) {
  return spec.gradient(params);
}

}  // namespace chaosode
