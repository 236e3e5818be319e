#pragma once

/// \file kernel.hpp
/// Gaussian-RBF collocation RHS and the kernel-in-time regression surrogate
/// used to estimate derivatives from observations.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chaosode/dual.hpp"
#include "chaosode/rhs_model.hpp"

namespace chaosode {

struct KernelSpec {
  double lengthscale = 1.0;
  double lambda = 1e-8;
};

/// exp(-|a-b|^2 / (2 l^2)).
double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

/// Median pairwise Euclidean distance among the rows of `points`.
double median_pairwise_distance(const Eigen::MatrixXd& points);

/// `per_dim`^n points on a uniform grid over the bounding box of `states`,
/// each side pushed out by `inflate` times the box width.
Eigen::MatrixXd grid_pilots(const Eigen::MatrixXd& states, std::size_t per_dim, double inflate);

/// Uniform grid over an explicit box: bounds[i] = (lo, hi).
Eigen::MatrixXd grid_points(const std::vector<std::pair<double, double>>& bounds, std::size_t per_dim);

/// f_d(x) = sum_i c_{i,d} k(x, p_i) with c_d = (K + lambda I)^{-1} theta_d.
/// Parameters are pilot values, P x n row-major.
class KernelRhs final : public RhsModelBase<KernelRhs> {
 public:
  /// Throws FactorizationFailed if K + lambda I is not numerically SPD.
  KernelRhs(KernelSpec spec, Eigen::MatrixXd pilots);

  RhsKind kind() const override { return RhsKind::kernel; }
  std::size_t state_dim() const override { return static_cast<std::size_t>(pilots_.cols()); }
  std::size_t param_count() const override {
    return static_cast<std::size_t>(pilots_.rows() * pilots_.cols());
  }
  std::size_t pilot_count() const { return static_cast<std::size_t>(pilots_.rows()); }
  const KernelSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& pilots() const { return pilots_; }
  /// K + lambda I.
  const Eigen::MatrixXd& system_matrix() const { return system_; }

  void coefficients(std::span<const double> params, std::span<double> coeffs) const override;
  void coefficients(std::span<const Dual8> params, std::span<Dual8> coeffs) const override;
  void pullback(std::span<const double> grad_coeffs, std::span<double> grad_params) const override;
  using RhsModel::coefficients;

  /// c = (K + lambda I)^{-1} pilot_values per output dimension (P x n).
  Eigen::MatrixXd fit_coefficients(const Eigen::MatrixXd& pilot_values) const;

  template <class C, class S>
  void evaluate(std::span<const C> coeffs, std::span<const S> x, std::span<S> dx) const {
    const std::size_t n = state_dim();
    const std::size_t p_count = pilot_count();
    const double g = -0.5 / (spec_.lengthscale * spec_.lengthscale);
    for (std::size_t d = 0; d < n; ++d) dx[d] = S(0.0);
    for (std::size_t i = 0; i < p_count; ++i) {
      S r2(0.0);
      for (std::size_t j = 0; j < n; ++j) {
        const S diff = x[j] - pilot_rows_[i * n + j];
        r2 += diff * diff;
      }
      using std::exp;
      const S k = exp(g * r2);
      for (std::size_t d = 0; d < n; ++d) dx[d] += coeffs[i * n + d] * k;
    }
  }

  void vjp(std::span<const double> coeffs, std::span<const double> x, std::span<const double> w,
           std::span<double> grad_x, std::span<double> grad_coeffs) const override;

  nlohmann::json to_json() const override;

 private:
  KernelSpec spec_;
  Eigen::MatrixXd pilots_;
  std::vector<double> pilot_rows_;  // row-major copy for the hot loop
  Eigen::MatrixXd system_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Kernel ridge regression of each state coordinate against time, centred on
/// the per-coordinate mean; supports analytic time derivatives.
class TimeSurrogate {
 public:
  TimeSurrogate(std::vector<double> centers, double lengthscale, Eigen::MatrixXd weights,
                Eigen::VectorXd offsets);

  std::vector<double> value(double t) const;
  std::vector<double> derivative(double t) const;
  double lengthscale() const { return lengthscale_; }

 private:
  std::vector<double> centers_;
  double lengthscale_;
  Eigen::MatrixXd weights_;  // centers x n
  Eigen::VectorXd offsets_;
};

/// Fits the surrogate with centers at `times`; `states` rows match `times`.
/// Throws FactorizationFailed.
TimeSurrogate fit_time_surrogate(std::span<const double> times, const Eigen::MatrixXd& states,
                                 const KernelSpec& spec);

inline std::vector<double> surrogate_derivative(const TimeSurrogate& s, double t) {
  return s.derivative(t);
}

}  // namespace chaosode
