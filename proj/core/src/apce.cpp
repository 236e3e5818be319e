#include "chaosode/apce.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "chaosode/errors.hpp"

namespace chaosode {

MomentTable empirical_moments(std::span<const double> sample, std::size_t max_moment) {
  if (sample.empty()) throw std::invalid_argument("empirical_moments: empty sample");
  MomentTable table;
  table.sample_size = sample.size();
  table.moments.assign(max_moment + 1, 0.0);
  for (double x : sample) {
    double p = 1.0;
    for (std::size_t k = 0; k <= max_moment; ++k) {
      table.moments[k] += p;
      p *= x;
    }
  }
  const double inv = 1.0 / static_cast<double>(sample.size());
  for (auto& m : table.moments) m *= inv;
  return table;
}

namespace {

// Unnormalized monic polynomial: rows k < d enforce sum_i c_i mu_{k+i} = 0,
// the last row pins c_d = 1.
std::vector<double> solve_hankel(const MomentTable& moments, std::size_t d) {
  if (d == 0) return {1.0};
  if (moments.moments.size() < 2 * d) throw SingularMoments(0, d);
  const auto dim = static_cast<Eigen::Index>(d + 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t i = 0; i <= d; ++i)
      a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = moments.moments[k + i];
  a(dim - 1, dim - 1) = 1.0;
  b(dim - 1) = 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  // PartialPivLU does not report singularity; inspect the pivots instead.
  const Eigen::MatrixXd& packed = lu.matrixLU();
  double max_pivot = 0.0;
  double min_pivot = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < dim; ++i) {
    max_pivot = std::max(max_pivot, std::abs(packed(i, i)));
    min_pivot = std::min(min_pivot, std::abs(packed(i, i)));
  }
  if (!(min_pivot > 1e-13 * max_pivot)) throw SingularMoments(0, d);
  Eigen::VectorXd c = lu.solve(b);
  if (!c.allFinite()) throw SingularMoments(0, d);
  return {c.data(), c.data() + c.size()};
}

UnivariatePoly scaled(std::vector<double> c, double norm_sq, std::size_t d) {
  if (!(norm_sq > 0.0) || !std::isfinite(norm_sq)) throw SingularMoments(0, d);
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (auto& v : c) v *= inv;
  return UnivariatePoly{std::move(c)};
}

}  // namespace

UnivariatePoly apce_univariate(const MomentTable& moments, std::size_t degree) {
  auto c = solve_hankel(moments, degree);
  if (moments.moments.size() < 2 * degree + 1)
    throw std::invalid_argument("apce_univariate: moment-based norm needs mu up to 2d");
  double norm_sq = 0.0;
  for (std::size_t i = 0; i <= degree; ++i)
    for (std::size_t j = 0; j <= degree; ++j) norm_sq += c[i] * c[j] * moments.moments[i + j];
  return scaled(std::move(c), norm_sq, degree);
}

UnivariatePoly apce_univariate(const MomentTable& moments, std::size_t degree,
                               std::span<const double> sample) {
  auto c = solve_hankel(moments, degree);
  const UnivariatePoly raw{c};
  double norm_sq = 0.0;
  for (double x : sample) {
    const double v = raw(x);
    norm_sq += v * v;
  }
  norm_sq /= static_cast<double>(sample.size());
  return scaled(std::move(c), norm_sq, degree);
}

namespace {

void append_indices(std::size_t dim, std::size_t n, std::size_t remaining, std::vector<int>& cur,
                    std::vector<std::vector<int>>& out) {
  if (dim + 1 == n) {
    cur[dim] = static_cast<int>(remaining);
    out.push_back(cur);
    return;
  }
  for (std::size_t a = remaining + 1; a-- > 0;) {
    cur[dim] = static_cast<int>(a);
    append_indices(dim + 1, n, remaining - a, cur, out);
  }
}

}  // namespace

std::vector<std::vector<int>> graded_multi_indices(std::size_t n, std::size_t n_max) {
  if (n == 0) throw std::invalid_argument("graded_multi_indices: n must be positive");
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  for (std::size_t total = 0; total <= n_max; ++total) append_indices(0, n, total, cur, out);
  return out;
}

std::size_t basis_size(std::size_t n, std::size_t n_max) {
  // C(n + n_max, n) computed incrementally; each partial product is exact.
  std::size_t r = 1;
  for (std::size_t k = 1; k <= n; ++k) r = r * (n_max + k) / k;
  return r;
}

std::string to_string(BasisVariant v) {
  return v == BasisVariant::orthonormal ? "orthonormal" : "monomial";
}

BasisVariant basis_variant_from_string(const std::string& name) {
  if (name == "orthonormal") return BasisVariant::orthonormal;
  if (name == "monomial") return BasisVariant::monomial;
  throw ConfigError("unknown basis variant '" + name + "'");
}

ApceBasis::ApceBasis(std::size_t n, std::size_t n_max, BasisVariant variant,
                     std::vector<std::vector<UnivariatePoly>> per_dim_polys)
    : n_(n),
      n_max_(n_max),
      variant_(variant),
      polys_(std::move(per_dim_polys)),
      indices_(graded_multi_indices(n, n_max)) {
  if (polys_.size() != n_) throw std::invalid_argument("ApceBasis: one family per dimension");
  for (const auto& fam : polys_)
    if (fam.size() != n_max_ + 1) throw std::invalid_argument("ApceBasis: family size != n_max + 1");
}

std::vector<double> ApceBasis::eval(std::span<const double> x) const {
  std::vector<double> out(size());
  eval<double>(x, std::span<double>(out));
  return out;
}

void ApceBasis::eval_with_jacobian(std::span<const double> x, std::span<double> values,
                                   std::span<double> jac) const {
  const std::size_t stride = n_max_ + 1;
  thread_local std::vector<double> val, der;
  val.resize(n_ * stride);
  der.resize(n_ * stride);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t d = 0; d <= n_max_; ++d) {
      val[i * stride + d] = polys_[i][d](x[i]);
      der[i * stride + d] = polys_[i][d].derivative(x[i]);
    }
  for (std::size_t p = 0; p < indices_.size(); ++p) {
    const auto& alpha = indices_[p];
    double prod = 1.0;
    for (std::size_t i = 0; i < n_; ++i) prod *= val[i * stride + static_cast<std::size_t>(alpha[i])];
    values[p] = prod;
    for (std::size_t k = 0; k < n_; ++k) {
      double g = der[k * stride + static_cast<std::size_t>(alpha[k])];
      for (std::size_t i = 0; i < n_; ++i)
        if (i != k) g *= val[i * stride + static_cast<std::size_t>(alpha[i])];
      jac[p * n_ + k] = g;
    }
  }
}

Eigen::MatrixXd ApceBasis::design_matrix(const Eigen::MatrixXd& states) const {
  Eigen::MatrixXd phi(states.rows(), static_cast<Eigen::Index>(size()));
  std::vector<double> x(n_), row(size());
  for (Eigen::Index r = 0; r < states.rows(); ++r) {
    for (std::size_t i = 0; i < n_; ++i) x[i] = states(r, static_cast<Eigen::Index>(i));
    eval<double>(x, row);
    for (std::size_t p = 0; p < size(); ++p) phi(r, static_cast<Eigen::Index>(p)) = row[p];
  }
  return phi;
}

nlohmann::json ApceBasis::to_json() const {
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& fam : polys_) {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& p : fam) f.push_back(p.coeffs);
    coeffs.push_back(std::move(f));
  }
  return {{"n", n_},
          {"n_max", n_max_},
          {"variant", to_string(variant_)},
          {"multi_indices", indices_},
          {"per_dim_coeffs", std::move(coeffs)}};
}

ApceBasis ApceBasis::from_json(const nlohmann::json& doc) {
  const auto n = doc.at("n").get<std::size_t>();
  const auto n_max = doc.at("n_max").get<std::size_t>();
  const auto variant = basis_variant_from_string(doc.value("variant", std::string("orthonormal")));
  std::vector<std::vector<UnivariatePoly>> polys;
  for (const auto& fam : doc.at("per_dim_coeffs")) {
    std::vector<UnivariatePoly> f;
    for (const auto& c : fam) f.push_back(UnivariatePoly{c.get<std::vector<double>>()});
    polys.push_back(std::move(f));
  }
  ApceBasis basis(n, n_max, variant, std::move(polys));
  if (doc.contains("multi_indices") &&
      doc.at("multi_indices").get<std::vector<std::vector<int>>>() != basis.multi_indices())
    throw std::invalid_argument("ApceBasis::from_json: multi-index order mismatch");
  return basis;
}

ApceBasis build_basis(const Eigen::MatrixXd& states, std::size_t n_max) {
  const auto n = static_cast<std::size_t>(states.cols());
  if (n == 0 || states.rows() == 0) throw std::invalid_argument("build_basis: empty sample");
  std::vector<std::vector<UnivariatePoly>> polys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd col = states.col(static_cast<Eigen::Index>(i));
    const std::span<const double> sample(col.data(), static_cast<std::size_t>(col.size()));
    const auto moments = empirical_moments(sample, 2 * n_max + 1);
    for (std::size_t d = 0; d <= n_max; ++d) {
      try {
        polys[i].push_back(apce_univariate(moments, d, sample));
      } catch (const SingularMoments&) {
        throw SingularMoments(i, d);
      }
    }
  }
  return ApceBasis(n, n_max, BasisVariant::orthonormal, std::move(polys));
}

ApceBasis monomial_basis(std::size_t n, std::size_t n_max) {
  std::vector<std::vector<UnivariatePoly>> polys(n);
  for (auto& fam : polys)
    for (std::size_t d = 0; d <= n_max; ++d) {
      std::vector<double> c(d + 1, 0.0);
      c[d] = 1.0;
      fam.push_back(UnivariatePoly{std::move(c)});
    }
  return ApceBasis(n, n_max, BasisVariant::monomial, std::move(polys));
}

Eigen::MatrixXd gram_matrix(const ApceBasis& basis, const Eigen::MatrixXd& states) {
  const Eigen::MatrixXd phi = basis.design_matrix(states);
  return (phi.transpose() * phi) / static_cast<double>(states.rows());
}

double condition_number(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

void ChaosRhs::vjp(std::span<const double> coeffs, std::span<const double> x,
                   std::span<const double> w, std::span<double> grad_x,
                   std::span<double> grad_coeffs) const {
  const std::size_t m = basis_.size();
  const std::size_t n = basis_.n();
  thread_local std::vector<double> phi, jac, weight;
  phi.resize(m);
  jac.resize(m * n);
  weight.assign(m, 0.0);
  basis_.eval_with_jacobian(x, phi, jac);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = coeffs.data() + i * m;
    double* grow = grad_coeffs.data() + i * m;
    for (std::size_t p = 0; p < m; ++p) {
      grow[p] += w[i] * phi[p];
      weight[p] += w[i] * row[p];
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    double g = 0.0;
    for (std::size_t p = 0; p < m; ++p) g += weight[p] * jac[p * n + k];
    grad_x[k] = g;
  }
}

nlohmann::json ChaosRhs::to_json() const {
  return {{"kind", "chaos"}, {"basis", basis_.to_json()}};
}

}  // namespace chaosode
