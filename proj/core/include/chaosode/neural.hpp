#pragma once

/// \file neural.hpp
/// Fully connected tanh network as an RHS.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "chaosode/rhs_model.hpp"

namespace chaosode {

/// Layer widths (n, hidden..., n). tanh on hidden layers, identity output.
struct MlpSpec {
  std::vector<std::size_t> layer_widths{2, 32, 32, 2};

  void validate() const;
};

/// sum over layers of (w_l * w_{l+1} + w_{l+1}). Throws on invalid spec.
std::size_t mlp_param_count(const MlpSpec& spec);

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
std::vector<double> mlp_init(const MlpSpec& spec, std::uint64_t seed);

/// Parameter layout per layer: weights (out x in, row-major) then biases.
class MlpRhs final : public RhsModelBase<MlpRhs> {
 public:
  explicit MlpRhs(MlpSpec spec);

  RhsKind kind() const override { return RhsKind::neural; }
  std::size_t state_dim() const override { return spec_.layer_widths.front(); }
  std::size_t param_count() const override { return param_count_; }
  const MlpSpec& spec() const { return spec_; }

  template <class C, class S>
  void evaluate(std::span<const C> params, std::span<const S> x, std::span<S> dx) const {
    const auto& w = spec_.layer_widths;
    thread_local std::vector<S> a, b;
    a.assign(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      const std::size_t in = w[l];
      const std::size_t out = w[l + 1];
      const C* weights = params.data() + off;
      const C* bias = weights + in * out;
      b.resize(out);
      const bool hidden = l + 2 < w.size();
      for (std::size_t o = 0; o < out; ++o) {
        S acc(bias[o]);
        const C* row = weights + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * a[i];
        if (hidden) {
          using std::tanh;
          acc = tanh(acc);
        }
        b[o] = acc;
      }
      off += in * out + out;
      a.swap(b);
    }
    for (std::size_t i = 0; i < a.size(); ++i) dx[i] = a[i];
  }

  void vjp(std::span<const double> coeffs, std::span<const double> x, std::span<const double> w,
           std::span<double> grad_x, std::span<double> grad_coeffs) const override;

  nlohmann::json to_json() const override;

 private:
  MlpSpec spec_;
  std::size_t param_count_;
};

}  // namespace chaosode
