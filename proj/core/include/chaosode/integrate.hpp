#pragma once

/// \file integrate.hpp
/// Fixed-step classical RK4, trajectory sampling at requested times, and
/// multiple-shooting segmentation of an observation grid.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chaosode/dual.hpp"
#include "chaosode/errors.hpp"
#include "chaosode/rhs_model.hpp"

namespace chaosode {

/// How many RK4 sub-steps to take between consecutive output times.
/// A positive `substeps` fixes the count per interval; otherwise each
/// interval of length dt is split into ceil(dt / h_max) equal steps.
struct StepPolicy {
  int substeps = 0;
  double h_max = 0.01;

  int steps_for(double dt) const {
    if (substeps > 0) return substeps;
    const double n = std::ceil(dt / h_max - 1e-9);
    return n < 1.0 ? 1 : static_cast<int>(n);
  }
};

struct Ivp {
  RhsPtr rhs;
  std::vector<double> params;
  std::vector<double> x0;
  double t0 = 0.0;
  double t_end = 1.0;
};

struct Trajectory {
  std::vector<double> times;
  Eigen::MatrixXd states;  // rows = times
};

/// Inclusive index ranges into an observation grid; neighbours share one index.
struct SegmentPlan {
  std::vector<std::pair<std::size_t, std::size_t>> segment_bounds;
};

/// Scratch space for one RK4 step of dimension n.
template <class S>
struct Rk4Workspace {
  explicit Rk4Workspace(std::size_t n) : k1(n), k2(n), k3(n), k4(n), u(n) {}
  std::vector<S> k1, k2, k3, k4, u;
};

/// One classical RK4 step `out = x + h/6 (k1 + 2k2 + 2k3 + k4)`.
/// `field(x, dx)` writes f(x) into dx. Throws NonFinite on NaN/Inf.
/// `out` may alias `x`.
template <class S, class Field>
void rk4_step(const Field& field, std::span<const S> x, double h, std::span<S> out,
              Rk4Workspace<S>& ws) {
  const std::size_t n = x.size();
  const double half = 0.5 * h;
  field(x, std::span<S>(ws.k1));
  for (std::size_t i = 0; i < n; ++i) ws.u[i] = x[i] + half * ws.k1[i];
  field(std::span<const S>(ws.u), std::span<S>(ws.k2));
  for (std::size_t i = 0; i < n; ++i) ws.u[i] = x[i] + half * ws.k2[i];
  field(std::span<const S>(ws.u), std::span<S>(ws.k3));
  for (std::size_t i = 0; i < n; ++i) ws.u[i] = x[i] + h * ws.k3[i];
  field(std::span<const S>(ws.u), std::span<S>(ws.k4));
  const double sixth = h / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    S next = x[i] + sixth * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    if (!is_finite(next) || !is_finite(ws.k4[i]) || !is_finite(ws.k1[i])) throw NonFinite();
    out[i] = next;
  }
}

/// Marches from (t0, x0) through `times` and returns the states at exactly
/// those times, row-major (times.size() x n). Throws Diverged.
template <class S, class Field>
std::vector<S> solve_generic(const Field& field, std::span<const S> x0, double t0,
                             std::span<const double> times, const StepPolicy& policy) {
  const std::size_t n = x0.size();
  std::vector<S> out(times.size() * n);
  std::vector<S> x(x0.begin(), x0.end());
  Rk4Workspace<S> ws(n);
  double t = t0;
  for (std::size_t r = 0; r < times.size(); ++r) {
    const double dt = times[r] - t;
    if (dt > 0.0) {
      const int steps = policy.steps_for(dt);
      const double h = dt / steps;
      for (int s = 0; s < steps; ++s) {
        try {
          rk4_step<S>(field, std::span<const S>(x), h, std::span<S>(x), ws);
        } catch (const NonFinite&) {
          throw Diverged(t + s * h);
        }
      }
      t = times[r];
    }
    std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  return out;
}

/// Binds a model and its coefficients into an RK4 field.
template <class C>
struct RhsField {
  const RhsModel* rhs;
  std::span<const C> coeffs;

  template <class S>
  void operator()(std::span<const S> x, std::span<S> dx) const {
    rhs->eval(coeffs, x, dx);
  }
};

/// RK4 step for a model at trainable parameters `params`.
std::vector<double> rk4_step(const RhsModel& rhs, std::span<const double> params,
                             std::span<const double> x, double h);

/// Solves the IVP at `output_times` (ascending, within [t0, t_end]).
Trajectory solve(const Ivp& ivp, std::span<const double> output_times,
                 const StepPolicy& policy);

/// Same, with a fixed number of sub-steps per output interval.
Trajectory solve(const Ivp& ivp, std::span<const double> output_times, int substeps);

/// Greedy left-to-right chunks of `target` indices sharing boundaries; a
/// trailing chunk with fewer than 2 indices is merged into its predecessor.
SegmentPlan segment_grid(std::size_t m, std::size_t target);

/// Checks the SegmentPlan invariants against a grid of m indices.
bool is_valid_plan(const SegmentPlan& plan, std::size_t m);

}  // namespace chaosode
