#include "chaosode/neural.hpp"

#include <random>
#include <stdexcept>

namespace chaosode {

void MlpSpec::validate() const {
  if (layer_widths.size() < 3) throw std::invalid_argument("MlpSpec: at least one hidden layer required");
  if (layer_widths.front() != layer_widths.back())
    throw std::invalid_argument("MlpSpec: input and output widths must equal the state dimension");
  for (auto w : layer_widths)
    if (w == 0) throw std::invalid_argument("MlpSpec: zero-width layer");
}

std::size_t mlp_param_count(const MlpSpec& spec) {
  spec.validate();
  std::size_t total = 0;
  const auto& w = spec.layer_widths;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) total += w[l] * w[l + 1] + w[l + 1];
  return total;
}

std::vector<double> mlp_init(const MlpSpec& spec, std::uint64_t seed) {
  std::vector<double> params(mlp_param_count(spec), 0.0);
  std::mt19937_64 rng(seed);
  const auto& w = spec.layer_widths;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w[l] + w[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t k = 0; k < w[l] * w[l + 1]; ++k) params[off + k] = dist(rng);
    off += w[l] * w[l + 1] + w[l + 1];
  }
  return params;
}

MlpRhs::MlpRhs(MlpSpec spec) : spec_(std::move(spec)), param_count_(mlp_param_count(spec_)) {}

void MlpRhs::vjp(std::span<const double> params, std::span<const double> x, std::span<const double> w_out,
                 std::span<double> grad_x, std::span<double> grad_params) const {
  const auto& w = spec_.layer_widths;
  const std::size_t layers = w.size() - 1;
  // Forward pass keeping every layer's activations.
  thread_local std::vector<std::vector<double>> acts;
  thread_local std::vector<std::size_t> offsets;
  acts.resize(layers + 1);
  offsets.resize(layers);
  acts[0].assign(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = off;
    const std::size_t in = w[l];
    const std::size_t out = w[l + 1];
    const double* weights = params.data() + off;
    const double* bias = weights + in * out;
    auto& next = acts[l + 1];
    next.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias[o];
      const double* row = weights + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * acts[l][i];
      next[o] = (l + 1 < layers) ? std::tanh(acc) : acc;
    }
    off += in * out + out;
  }
  thread_local std::vector<double> delta, prev;
  delta.assign(w_out.begin(), w_out.end());
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = w[l];
    const std::size_t out = w[l + 1];
    if (l + 1 < layers)
      for (std::size_t o = 0; o < out; ++o) delta[o] *= 1.0 - acts[l + 1][o] * acts[l + 1][o];
    const double* weights = params.data() + offsets[l];
    double* gw = grad_params.data() + offsets[l];
    double* gb = gw + in * out;
    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      const double* row = weights + o * in;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        grow[i] += d * acts[l][i];
        prev[i] += d * row[i];
      }
    }
    delta.swap(prev);
  }
  for (std::size_t i = 0; i < grad_x.size(); ++i) grad_x[i] = delta[i];
}

nlohmann::json MlpRhs::to_json() const {
  return {{"kind", "neural"}, {"widths", spec_.layer_widths}, {"activation", "tanh"}};
}

}  // namespace chaosode
