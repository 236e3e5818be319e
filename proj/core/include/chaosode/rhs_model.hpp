#pragma once

/// \file rhs_model.hpp
/// Runtime-polymorphic parameterized vector field f(x; theta): R^n -> R^n.
///
/// Trainable parameters are first mapped to *coefficients* (identity for the
/// polynomial and network models, a kernel solve for the collocation model);
/// evaluation consumes coefficients. Splitting the two lets the loss map
/// parameters once per solve instead of once per RHS call, and gives the
/// reverse-mode gradient a single pullback at the end.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaosode/dual.hpp"

namespace chaosode {

enum class RhsKind { chaos, kernel, neural };

std::string to_string(RhsKind kind);
RhsKind rhs_kind_from_string(const std::string& name);

class RhsModel {
 public:
  virtual ~RhsModel() = default;

  virtual RhsKind kind() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual std::size_t coeff_count() const { return param_count(); }

  /// params -> coefficients. Default: identity.
  virtual void coefficients(std::span<const double> params, std::span<double> coeffs) const;
  virtual void coefficients(std::span<const Dual8> params, std::span<Dual8> coeffs) const;
  /// Transposed map: gradient w.r.t. coefficients -> gradient w.r.t. params.
  virtual void pullback(std::span<const double> grad_coeffs, std::span<double> grad_params) const;

  virtual void eval(std::span<const double> coeffs, std::span<const double> x,
                    std::span<double> dx) const = 0;
  virtual void eval(std::span<const double> coeffs, std::span<const Dual8> x,
                    std::span<Dual8> dx) const = 0;
  virtual void eval(std::span<const Dual8> coeffs, std::span<const Dual8> x,
                    std::span<Dual8> dx) const = 0;

  /// Vector-Jacobian product at x with cotangent w: overwrites grad_x with
  /// w^T df/dx and accumulates w^T df/dcoeffs into grad_coeffs.
  virtual void vjp(std::span<const double> coeffs, std::span<const double> x,
                   std::span<const double> w, std::span<double> grad_x,
                   std::span<double> grad_coeffs) const = 0;

  /// Model structure (no parameters) as JSON; `load_rhs` inverts it.
  virtual nlohmann::json to_json() const = 0;

  /// Convenience: evaluate directly from trainable parameters.
  std::vector<double> operator()(std::span<const double> params, std::span<const double> x) const;
  std::vector<double> coefficients(std::span<const double> params) const;
};

using RhsPtr = std::shared_ptr<const RhsModel>;

/// Reconstructs a model from its `to_json` document.
RhsPtr load_rhs(const nlohmann::json& doc);

/// CRTP helper: forwards the three scalar overloads of `eval` to a single
/// `Derived::evaluate<C, S>` template.
template <class Derived>
class RhsModelBase : public RhsModel {
 public:
  void eval(std::span<const double> coeffs, std::span<const double> x,
            std::span<double> dx) const override {
    self().template evaluate<double, double>(coeffs, x, dx);
  }
  void eval(std::span<const double> coeffs, std::span<const Dual8> x,
            std::span<Dual8> dx) const override {
    self().template evaluate<double, Dual8>(coeffs, x, dx);
  }
  void eval(std::span<const Dual8> coeffs, std::span<const Dual8> x,
            std::span<Dual8> dx) const override {
    self().template evaluate<Dual8, Dual8>(coeffs, x, dx);
  }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

}  // namespace chaosode
