#include "chaosode/kernel.hpp"

#include <algorithm>
#include <stdexcept>

#include "chaosode/errors.hpp"

namespace chaosode {

double kernel_eval(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
  double r2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    r2 += d * d;
  }
  return std::exp(-r2 / (2.0 * spec.lengthscale * spec.lengthscale));
}

double median_pairwise_distance(const Eigen::MatrixXd& points) {
  std::vector<double> dist;
  const Eigen::Index m = points.rows();
  if (m < 2) throw std::invalid_argument("median_pairwise_distance: need two points");
  dist.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) dist.push_back((points.row(i) - points.row(j)).norm());
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double med = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  return med;
}

Eigen::MatrixXd grid_points(const std::vector<std::pair<double, double>>& bounds, std::size_t per_dim) {
  const std::size_t n = bounds.size();
  if (n == 0 || per_dim < 1) throw std::invalid_argument("grid_points: empty grid");
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= per_dim;
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < total; ++r) {
    std::size_t rem = r;
    // Last dimension varies fastest.
    for (std::size_t i = n; i-- > 0;) {
      const std::size_t k = rem % per_dim;
      rem /= per_dim;
      const auto [lo, hi] = bounds[i];
      const double frac = per_dim == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(per_dim - 1);
      pts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = lo + frac * (hi - lo);
    }
  }
  return pts;
}

Eigen::MatrixXd grid_pilots(const Eigen::MatrixXd& states, std::size_t per_dim, double inflate) {
  std::vector<std::pair<double, double>> bounds;
  for (Eigen::Index i = 0; i < states.cols(); ++i) {
    const double lo = states.col(i).minCoeff();
    const double hi = states.col(i).maxCoeff();
    double pad = inflate * (hi - lo);
    if (!(pad > 0.0)) pad = 0.5;  // degenerate (constant) coordinate
    bounds.emplace_back(lo - pad, hi + pad);
  }
  return grid_points(bounds, per_dim);
}

KernelRhs::KernelRhs(KernelSpec spec, Eigen::MatrixXd pilots)
    : spec_(spec), pilots_(std::move(pilots)) {
  if (!(spec_.lengthscale > 0.0)) throw std::invalid_argument("KernelRhs: lengthscale must be positive");
  if (spec_.lambda < 0.0) throw std::invalid_argument("KernelRhs: lambda must be non-negative");
  const Eigen::Index p = pilots_.rows();
  const Eigen::Index n = pilots_.cols();
  pilot_rows_.resize(static_cast<std::size_t>(p * n));
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < n; ++j) pilot_rows_[static_cast<std::size_t>(i * n + j)] = pilots_(i, j);
  system_.resize(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      const double r2 = (pilots_.row(i) - pilots_.row(j)).squaredNorm();
      system_(i, j) = std::exp(-r2 / (2.0 * spec_.lengthscale * spec_.lengthscale));
    }
  system_.diagonal().array() += spec_.lambda;
  llt_.compute(system_);
  if (llt_.info() != Eigen::Success) throw FactorizationFailed("K + lambda I is not positive definite");
  const Eigen::VectorXd diag = llt_.matrixL().toDenseMatrix().diagonal();
  if (diag.minCoeff() <= 1e-14 * diag.maxCoeff())
    throw FactorizationFailed("K + lambda I is numerically singular");
}

Eigen::MatrixXd KernelRhs::fit_coefficients(const Eigen::MatrixXd& pilot_values) const {
  if (pilot_values.rows() != pilots_.rows())
    throw std::invalid_argument("fit_coefficients: one value row per pilot");
  return llt_.solve(pilot_values);
}

void KernelRhs::coefficients(std::span<const double> params, std::span<double> coeffs) const {
  const Eigen::Index p = pilots_.rows();
  const Eigen::Index n = pilots_.cols();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> theta(
      params.data(), p, n);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> c(coeffs.data(), p, n);
  c = llt_.solve(Eigen::MatrixXd(theta));
}

void KernelRhs::coefficients(std::span<const Dual8> params, std::span<Dual8> coeffs) const {
  // The solve is linear, so values and each tangent column solve separately.
  const Eigen::Index p = pilots_.rows();
  const Eigen::Index n = pilots_.cols();
  const Eigen::Index w = static_cast<Eigen::Index>(kDualWidth);
  Eigen::MatrixXd rhs(p, n * (1 + w));
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index d = 0; d < n; ++d) {
      const Dual8& v = params[static_cast<std::size_t>(i * n + d)];
      rhs(i, d) = v.v;
      for (Eigen::Index k = 0; k < w; ++k) rhs(i, n + d * w + k) = v.d[static_cast<std::size_t>(k)];
    }
  const Eigen::MatrixXd sol = llt_.solve(rhs);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index d = 0; d < n; ++d) {
      Dual8& c = coeffs[static_cast<std::size_t>(i * n + d)];
      c.v = sol(i, d);
      for (Eigen::Index k = 0; k < w; ++k) c.d[static_cast<std::size_t>(k)] = sol(i, n + d * w + k);
    }
}

void KernelRhs::pullback(std::span<const double> grad_coeffs, std::span<double> grad_params) const {
  const Eigen::Index p = pilots_.rows();
  const Eigen::Index n = pilots_.cols();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gc(
      grad_coeffs.data(), p, n);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gp(grad_params.data(), p, n);
  gp = llt_.solve(Eigen::MatrixXd(gc));  // system matrix is symmetric
}

void KernelRhs::vjp(std::span<const double> coeffs, std::span<const double> x,
                    std::span<const double> w, std::span<double> grad_x,
                    std::span<double> grad_coeffs) const {
  const std::size_t n = state_dim();
  const std::size_t p_count = pilot_count();
  const double inv_l2 = 1.0 / (spec_.lengthscale * spec_.lengthscale);
  for (std::size_t j = 0; j < n; ++j) grad_x[j] = 0.0;
  for (std::size_t i = 0; i < p_count; ++i) {
    const double* pi = pilot_rows_.data() + i * n;
    double r2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = x[j] - pi[j];
      r2 += diff * diff;
    }
    const double k = std::exp(-0.5 * inv_l2 * r2);
    double s = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      grad_coeffs[i * n + d] += w[d] * k;
      s += w[d] * coeffs[i * n + d];
    }
    const double scale = -s * k * inv_l2;
    for (std::size_t j = 0; j < n; ++j) grad_x[j] += scale * (x[j] - pi[j]);
  }
}

nlohmann::json KernelRhs::to_json() const {
  std::vector<std::vector<double>> pts;
  for (Eigen::Index i = 0; i < pilots_.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(pilots_.cols()));
    for (Eigen::Index j = 0; j < pilots_.cols(); ++j) row[static_cast<std::size_t>(j)] = pilots_(i, j);
    pts.push_back(std::move(row));
  }
  return {{"kind", "kernel"},
          {"spec", {{"kernel", "gaussian_rbf"}, {"lengthscale", spec_.lengthscale}, {"lambda", spec_.lambda}}},
          {"pilot_points", pts}};
}

TimeSurrogate::TimeSurrogate(std::vector<double> centers, double lengthscale, Eigen::MatrixXd weights,
                             Eigen::VectorXd offsets)
    : centers_(std::move(centers)),
      lengthscale_(lengthscale),
      weights_(std::move(weights)),
      offsets_(std::move(offsets)) {}

std::vector<double> TimeSurrogate::value(double t) const {
  const auto n = static_cast<std::size_t>(weights_.cols());
  std::vector<double> out(offsets_.data(), offsets_.data() + n);
  const double g = -0.5 / (lengthscale_ * lengthscale_);
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    const double dt = t - centers_[i];
    const double k = std::exp(g * dt * dt);
    for (std::size_t d = 0; d < n; ++d)
      out[d] += weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) * k;
  }
  return out;
}

std::vector<double> TimeSurrogate::derivative(double t) const {
  const auto n = static_cast<std::size_t>(weights_.cols());
  std::vector<double> out(n, 0.0);
  const double inv_l2 = 1.0 / (lengthscale_ * lengthscale_);
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    const double dt = t - centers_[i];
    const double dk = -dt * inv_l2 * std::exp(-0.5 * inv_l2 * dt * dt);
    for (std::size_t d = 0; d < n; ++d)
      out[d] += weights_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) * dk;
  }
  return out;
}

TimeSurrogate fit_time_surrogate(std::span<const double> times, const Eigen::MatrixXd& states,
                                 const KernelSpec& spec) {
  const auto m = static_cast<Eigen::Index>(times.size());
  if (m < 2) throw std::invalid_argument("fit_time_surrogate: need at least two observations");
  if (states.rows() != m) throw std::invalid_argument("fit_time_surrogate: row count mismatch");
  if (!(spec.lengthscale > 0.0)) throw std::invalid_argument("fit_time_surrogate: lengthscale must be positive");
  Eigen::MatrixXd k(m, m);
  const double g = -0.5 / (spec.lengthscale * spec.lengthscale);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double dt = times[static_cast<std::size_t>(i)] - times[static_cast<std::size_t>(j)];
      k(i, j) = std::exp(g * dt * dt);
    }
  k.diagonal().array() += spec.lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw FactorizationFailed("time kernel matrix is not positive definite");
  const Eigen::VectorXd offsets = states.colwise().mean().transpose();
  const Eigen::MatrixXd centred = states.rowwise() - offsets.transpose();
  Eigen::MatrixXd weights = llt.solve(centred);
  if (!weights.allFinite()) throw FactorizationFailed("time kernel solve produced non-finite weights");
  return TimeSurrogate(std::vector<double>(times.begin(), times.end()), spec.lengthscale, std::move(weights),
                       offsets);
}

}  // namespace chaosode
