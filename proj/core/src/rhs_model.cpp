#include "chaosode/rhs_model.hpp"

#include <algorithm>
#include <stdexcept>

#include "chaosode/apce.hpp"
#include "chaosode/errors.hpp"
#include "chaosode/kernel.hpp"
#include "chaosode/neural.hpp"

namespace chaosode {

std::string to_string(RhsKind kind) {
  switch (kind) {
    case RhsKind::chaos: return "chaos";
    case RhsKind::kernel: return "kernel";
    case RhsKind::neural: return "neural";
  }
  return "unknown";
}

RhsKind rhs_kind_from_string(const std::string& name) {
  if (name == "chaos") return RhsKind::chaos;
  if (name == "kernel") return RhsKind::kernel;
  if (name == "neural") return RhsKind::neural;
  throw ConfigError("unknown rhs kind '" + name + "'");
}

void RhsModel::coefficients(std::span<const double> params, std::span<double> coeffs) const {
  std::copy(params.begin(), params.end(), coeffs.begin());
}

void RhsModel::coefficients(std::span<const Dual8> params, std::span<Dual8> coeffs) const {
  std::copy(params.begin(), params.end(), coeffs.begin());
}

void RhsModel::pullback(std::span<const double> grad_coeffs, std::span<double> grad_params) const {
  std::copy(grad_coeffs.begin(), grad_coeffs.end(), grad_params.begin());
}

std::vector<double> RhsModel::coefficients(std::span<const double> params) const {
  if (params.size() != param_count()) throw std::invalid_argument("parameter length mismatch");
  std::vector<double> c(coeff_count());
  coefficients(params, std::span<double>(c));
  return c;
}

std::vector<double> RhsModel::operator()(std::span<const double> params, std::span<const double> x) const {
  const auto c = coefficients(params);
  std::vector<double> dx(state_dim());
  eval(std::span<const double>(c), x, std::span<double>(dx));
  return dx;
}

RhsPtr load_rhs(const nlohmann::json& doc) {
  const auto kind = rhs_kind_from_string(doc.at("kind").get<std::string>());
  switch (kind) {
    case RhsKind::chaos:
      return std::make_shared<ChaosRhs>(ApceBasis::from_json(doc.at("basis")));
    case RhsKind::kernel: {
      const auto& spec = doc.at("spec");
      KernelSpec ks{spec.at("lengthscale").get<double>(), spec.at("lambda").get<double>()};
      const auto pts = doc.at("pilot_points").get<std::vector<std::vector<double>>>();
      if (pts.empty()) throw std::invalid_argument("load_rhs: no pilot points");
      Eigen::MatrixXd pilots(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts[0].size()));
      for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = 0; j < pts[i].size(); ++j)
          pilots(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pts[i][j];
      return std::make_shared<KernelRhs>(ks, std::move(pilots));
    }
    case RhsKind::neural: {
      MlpSpec spec{doc.at("widths").get<std::vector<std::size_t>>()};
      if (doc.value("activation", std::string("tanh")) != "tanh")
        throw std::invalid_argument("load_rhs: only tanh activation is supported");
      return std::make_shared<MlpRhs>(std::move(spec));
    }
  }
  throw std::invalid_argument("load_rhs: unknown kind");
}

}  // namespace chaosode
