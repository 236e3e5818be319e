#include "chaosode/integrate.hpp"

#include <stdexcept>

namespace chaosode {

std::vector<double> rk4_step(const RhsModel& rhs, std::span<const double> params,
                             std::span<const double> x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("rk4_step: h must be positive");
  const auto coeffs = rhs.coefficients(params);
  std::vector<double> out(x.size());
  Rk4Workspace<double> ws(x.size());
  rk4_step<double>(RhsField<double>{&rhs, coeffs}, x, h, std::span<double>(out), ws);
  return out;
}

Trajectory solve(const Ivp& ivp, std::span<const double> output_times, const StepPolicy& policy) {
  if (!ivp.rhs) throw std::invalid_argument("solve: missing rhs");
  if (!(ivp.t_end > ivp.t0)) throw std::invalid_argument("solve: t_end must exceed t0");
  if (ivp.x0.size() != ivp.rhs->state_dim())
    throw std::invalid_argument("solve: x0 dimension mismatch");
  double prev = ivp.t0;
  for (double t : output_times) {
    if (t < prev || t > ivp.t_end) throw std::invalid_argument("solve: output times out of order or range");
    prev = t;
  }
  const auto coeffs = ivp.rhs->coefficients(ivp.params);
  const auto flat = solve_generic<double>(RhsField<double>{ivp.rhs.get(), coeffs},
                                          std::span<const double>(ivp.x0), ivp.t0, output_times,
                                          policy);
  const std::size_t n = ivp.x0.size();
  Trajectory traj;
  traj.times.assign(output_times.begin(), output_times.end());
  traj.states.resize(static_cast<Eigen::Index>(output_times.size()), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < output_times.size(); ++r)
    for (std::size_t c = 0; c < n; ++c)
      traj.states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * n + c];
  return traj;
}

Trajectory solve(const Ivp& ivp, std::span<const double> output_times, int substeps) {
  if (substeps <= 0) throw std::invalid_argument("solve: substeps must be positive");
  return solve(ivp, output_times, StepPolicy{substeps, 0.0});
}

SegmentPlan segment_grid(std::size_t m, std::size_t target) {
  if (m < 2) throw std::invalid_argument("segment_grid: need at least two indices");
  if (target < 2) throw std::invalid_argument("segment_grid: target must be >= 2");
  SegmentPlan plan;
  std::size_t start = 0;
  while (start + 1 < m) {
    std::size_t end = start + target - 1;
    // A remainder of a single index cannot form a segment; it is absorbed.
    if (end + 1 >= m) end = m - 1;
    plan.segment_bounds.emplace_back(start, end);
    start = end;
  }
  return plan;
}

bool is_valid_plan(const SegmentPlan& plan, std::size_t m) {
  const auto& s = plan.segment_bounds;
  if (s.empty() || s.front().first != 0 || s.back().second != m - 1) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].second < s[i].first + 1) return false;
    if (i > 0 && s[i].first != s[i - 1].second) return false;
  }
  return true;
}

}  // namespace chaosode
