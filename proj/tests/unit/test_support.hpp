#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "chaosode/apce.hpp"
#include "chaosode/integrate.hpp"

namespace chaosode::testing {

// Raw-monomial polynomial RHS; with n = 2, n_max = 2 the index order is
// 1, x, y, x^2, xy, y^2.
inline std::shared_ptr<ChaosRhs> monomial_rhs(std::size_t n, std::size_t n_max) {
  return std::make_shared<ChaosRhs>(monomial_basis(n, n_max));
}

// Lotka-Volterra (alpha=1.5, beta=gamma=1, delta=3) in the monomial basis.
inline std::vector<double> lv_monomial_params() {
  return {0.0, 1.5, 0.0, 0.0, -1.0, 0.0,   //
          0.0, 0.0, -3.0, 0.0, 1.0, 0.0};
}

inline std::vector<double> linspace(double a, double b, std::size_t m) {
  std::vector<double> t(m);
  for (std::size_t i = 0; i < m; ++i)
    t[i] = m == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(m - 1);
  return t;
}

}  // namespace chaosode::testing
