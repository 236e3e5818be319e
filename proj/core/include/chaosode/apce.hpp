#pragma once

/// \file apce.hpp
/// Data-driven orthonormal polynomials (arbitrary polynomial chaos) and the
/// polynomial-expansion RHS built on their total-degree tensor products.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chaosode/rhs_model.hpp"

namespace chaosode {

/// Raw moments mu_0..mu_K of a sample (or of a known distribution).
struct MomentTable {
  std::vector<double> moments;
  std::size_t sample_size = 0;  // 0 for exact (analytic) moments
};

MomentTable empirical_moments(std::span<const double> sample, std::size_t max_moment);

/// Polynomial in monomial form, coefficients ascending by degree.
struct UnivariatePoly {
  std::vector<double> coeffs;

  std::size_t degree() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }

  template <class S>
  S operator()(const S& x) const {
    S acc(coeffs.back());
    for (std::size_t i = coeffs.size() - 1; i-- > 0;) acc = acc * x + coeffs[i];
    return acc;
  }

  double derivative(double x) const {
    double acc = 0.0;
    for (std::size_t i = coeffs.size() - 1; i >= 1; --i) acc = acc * x + static_cast<double>(i) * coeffs[i];
    return acc;
  }
};

/// Degree-d orthogonal polynomial from the Hankel moment system with the
/// leading coefficient fixed to 1, normalized to unit norm. Without a
/// sample the norm comes from the moments (needs mu up to 2d); with a
/// sample it is the Monte Carlo norm over that sample.
/// Throws SingularMoments(0, d) if the system is singular.
UnivariatePoly apce_univariate(const MomentTable& moments, std::size_t degree);
UnivariatePoly apce_univariate(const MomentTable& moments, std::size_t degree,
                               std::span<const double> sample);

/// All exponent vectors with total degree <= n_max, graded by total degree
/// and, within one degree, in descending order of the leading exponents.
std::vector<std::vector<int>> graded_multi_indices(std::size_t n, std::size_t n_max);

/// C(n + n_max, n).
std::size_t basis_size(std::size_t n, std::size_t n_max);

enum class BasisVariant { orthonormal, monomial };

std::string to_string(BasisVariant v);
BasisVariant basis_variant_from_string(const std::string& name);

class ApceBasis {
 public:
  ApceBasis() = default;
  ApceBasis(std::size_t n, std::size_t n_max, BasisVariant variant,
            std::vector<std::vector<UnivariatePoly>> per_dim_polys);

  std::size_t n() const { return n_; }
  std::size_t n_max() const { return n_max_; }
  std::size_t size() const { return indices_.size(); }
  BasisVariant variant() const { return variant_; }
  const std::vector<std::vector<int>>& multi_indices() const { return indices_; }
  const std::vector<std::vector<UnivariatePoly>>& per_dim_polys() const { return polys_; }

  /// Phi_alpha(x) for every multi-index, in index order.
  template <class S>
  void eval(std::span<const S> x, std::span<S> out) const {
    const std::size_t stride = n_max_ + 1;
    thread_local std::vector<S> table;
    table.resize(n_ * stride);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t d = 0; d <= n_max_; ++d) table[i * stride + d] = polys_[i][d](x[i]);
    for (std::size_t p = 0; p < indices_.size(); ++p) {
      S prod = table[static_cast<std::size_t>(indices_[p][0])];
      for (std::size_t i = 1; i < n_; ++i) prod = prod * table[i * stride + static_cast<std::size_t>(indices_[p][i])];
      out[p] = prod;
    }
  }

  std::vector<double> eval(std::span<const double> x) const;

  /// Values and partial derivatives: jac is size() x n, row-major.
  void eval_with_jacobian(std::span<const double> x, std::span<double> values,
                          std::span<double> jac) const;

  /// Feature matrix (rows = samples).
  Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& states) const;

  nlohmann::json to_json() const;
  static ApceBasis from_json(const nlohmann::json& doc);

 private:
  std::size_t n_ = 0;
  std::size_t n_max_ = 0;
  BasisVariant variant_ = BasisVariant::orthonormal;
  std::vector<std::vector<UnivariatePoly>> polys_;  // [dim][degree]
  std::vector<std::vector<int>> indices_;
};

/// Per-dimension aPC families from the columns of `states` (rows = samples).
/// Throws SingularMoments naming the offending dimension.
ApceBasis build_basis(const Eigen::MatrixXd& states, std::size_t n_max);

/// Raw monomials x^alpha on the same multi-index set.
ApceBasis monomial_basis(std::size_t n, std::size_t n_max);

/// (1/N) Phi^T Phi over the sample rows.
Eigen::MatrixXd gram_matrix(const ApceBasis& basis, const Eigen::MatrixXd& states);

/// 2-norm condition number of a symmetric positive semi-definite matrix.
double condition_number(const Eigen::MatrixXd& sym);

/// f_i(x) = Phi(x) . theta_i; params are an n x M row-major matrix.
class ChaosRhs final : public RhsModelBase<ChaosRhs> {
 public:
  explicit ChaosRhs(ApceBasis basis) : basis_(std::move(basis)) {}

  RhsKind kind() const override { return RhsKind::chaos; }
  std::size_t state_dim() const override { return basis_.n(); }
  std::size_t param_count() const override { return basis_.n() * basis_.size(); }
  const ApceBasis& basis() const { return basis_; }

  template <class C, class S>
  void evaluate(std::span<const C> coeffs, std::span<const S> x, std::span<S> dx) const {
    const std::size_t m = basis_.size();
    thread_local std::vector<S> phi;
    phi.resize(m);
    basis_.eval<S>(x, std::span<S>(phi));
    for (std::size_t i = 0; i < basis_.n(); ++i) {
      S acc(0.0);
      const C* row = coeffs.data() + i * m;
      for (std::size_t p = 0; p < m; ++p) acc += row[p] * phi[p];
      dx[i] = acc;
    }
  }

  void vjp(std::span<const double> coeffs, std::span<const double> x, std::span<const double> w,
           std::span<double> grad_x, std::span<double> grad_coeffs) const override;

  nlohmann::json to_json() const override;

 private:
  ApceBasis basis_;
};

}  // namespace chaosode
