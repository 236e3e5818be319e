#pragma once

/// \file loss.hpp
/// Single- and multiple-shooting trajectory losses and their exact gradients
/// under the fixed RK4 discretization.

#include <cstddef>
#include <span>
#include <vector>

#include "chaosode/integrate.hpp"
#include "chaosode/observations.hpp"
#include "chaosode/rhs_model.hpp"

namespace chaosode {

enum class ShootingMode { single, multiple };

struct DivergencePolicy {
  double penalty_loss = 1e12;
};

struct LossSpec {
  ShootingMode mode = ShootingMode::single;
  SegmentPlan plan;  // used in multiple-shooting mode
  double continuity_weight = 1.0;
  StepPolicy step;
  DivergencePolicy divergence;
};

/// Trajectory-matching objective over one data set.
///
/// Single shooting integrates from the known (t0, x0) through every
/// observation time and returns the mean squared error over all N*n
/// entries. Multiple shooting integrates each segment from its anchor (the
/// known x0 for the first segment, the observation at the segment's first
/// index otherwise). Every observation is predicted by exactly one segment,
/// so the squared errors are again averaged over N*n entries, plus
/// continuity_weight * sum ||segment end - next anchor||^2.
/// Any divergence maps to the penalty loss.
class ShootingLoss {
 public:
  ShootingLoss(RhsPtr rhs, const ObservationSet& data, LossSpec spec);

  const LossSpec& spec() const { return spec_; }
  const RhsModel& rhs() const { return *rhs_; }
  std::size_t dim() const { return rhs_->param_count(); }
  double penalty() const { return spec_.divergence.penalty_loss; }

  /// Loss value; divergence yields the penalty.
  double value(std::span<const double> params) const;

  /// Reverse-mode (discrete adjoint) gradient. Throws DivergedNoGradient.
  std::vector<double> gradient(std::span<const double> params) const;

  /// Value and gradient together; returns false when the solve diverges.
  bool value_and_gradient(std::span<const double> params, double& f, std::span<double> grad) const;

  /// Forward-mode gradient: derivative-carrying scalars pushed through the
  /// unrolled solve, kDualWidth parameter tangents per pass.
  std::vector<double> gradient_forward(std::span<const double> params) const;

 private:
  struct Segment {
    std::size_t first = 0;  // anchor index
    std::size_t last = 0;
    std::vector<double> anchor;
    double t_anchor = 0.0;
  };

  template <class C, class S>
  S primal(std::span<const C> coeffs) const;

  double adjoint(std::span<const double> coeffs, std::span<double> grad_coeffs) const;

  RhsPtr rhs_;
  std::vector<double> times_;
  std::vector<double> obs_;  // row-major N x n
  std::size_t n_ = 0;
  LossSpec spec_;
  std::vector<Segment> segments_;
  double sse_scale_ = 1.0;
};

/// Free-function forms.
double loss(const ShootingLoss& spec, std::span<const double> params);
std::vector<double> gradient(const ShootingLoss& spec, std::span<const double> params);

}  // namespace chaosode
