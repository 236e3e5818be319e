#pragma once

/// \file pipeline.hpp
/// End-to-end training: surrogate-based initial estimate, then PSO on the
/// single-shooting loss, CMA-ES and quasi-Newton on the multiple-shooting
/// loss, and a final single-shooting quasi-Newton refinement.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "chaosode/apce.hpp"
#include "chaosode/integrate.hpp"
#include "chaosode/observations.hpp"
#include "chaosode/optimize.hpp"
#include "chaosode/rhs_model.hpp"

namespace chaosode {

struct ModelConfig {
  RhsKind kind = RhsKind::chaos;
  // chaos
  std::size_t n_max = 3;
  BasisVariant basis_variant = BasisVariant::orthonormal;
  // kernel; lengthscale 0 selects the median pilot distance
  std::size_t pilots_per_dim = 5;
  double pilot_inflate = 0.1;
  double kernel_lengthscale = 0.0;
  double kernel_lambda = 1e-8;
  // neural
  std::vector<std::size_t> widths{2, 32, 32, 2};
};

struct InitConfig {
  /// Time-surrogate lengthscale as a multiple of the sample spacing; 0
  /// selects the median pairwise distance of the observation times.
  double surrogate_spacing_factor = 2.0;
  double surrogate_lambda = 1e-6;
  /// Ridge weight relative to the mean squared feature norm.
  double ridge = 1e-10;
  /// Ridge for regression onto a known field on a dense grid.
  double pretrain_ridge = 0.0;
  std::size_t neural_steps = 500;
  double neural_learning_rate = 1e-2;
};

struct PipelineConfig {
  ModelConfig model;
  InitConfig init;
  std::size_t segment_size = 8;
  double continuity_weight = 1.0;
  StepPolicy step;
  double penalty = 1e12;

  bool run_pso = true;
  bool run_cmaes = true;
  bool run_qn_multiple = true;
  bool run_qn_single = true;
  PsoConfig pso;
  /// sigma0 is scaled by the RMS of the stage's starting point.
  CmaesConfig cmaes;
  QuasiNewtonConfig qn_multiple;
  QuasiNewtonConfig qn_single;

  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

struct StageReport {
  std::string name;
  std::string status;  // ok, failed, disabled
  std::string message;
  double start_loss = 0.0;  // on the stage's own objective
  double end_loss = 0.0;
  double single_loss = 0.0;  // single-shooting loss of the stage output
  std::size_t iterations = 0;
  std::size_t evals = 0;
  double seconds = 0.0;
};

struct TrainedModel {
  RhsPtr rhs;
  std::vector<double> params;
  std::vector<StageReport> stages;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
};

/// Model skeleton for a config. Basis moments and pilot boxes come from
/// `build_states` (rows = samples).
RhsPtr build_rhs(const ModelConfig& config, const Eigen::MatrixXd& build_states);

/// Fits rhs params to (x, dx) pairs: ridge least squares for the linear
/// kinds, fixed-step gradient descent from a seeded init for the network.
std::vector<double> fit_field(const RhsModel& rhs, const Eigen::MatrixXd& x, const Eigen::MatrixXd& dx,
                              const InitConfig& config, std::uint64_t seed);

/// Mean squared error of rhs(params, x_i) against dx_i.
double field_mse(const RhsModel& rhs, std::span<const double> params, const Eigen::MatrixXd& x,
                 const Eigen::MatrixXd& dx);

/// Kernel-in-time surrogate of the data, derivative pairs at every
/// observation time, then fit_field.
std::vector<double> estimate_initial_params(const ObservationSet& data, const RhsModel& rhs,
                                            const InitConfig& config, std::uint64_t seed);

using TrueField = std::function<void(std::span<const double> x, std::span<double> dx)>;

/// Regression onto a known field sampled on a `per_dim`^n grid over `region`.
std::vector<double> pretrain_perfect_information(const RhsModel& rhs, const TrueField& field,
                                                 const std::vector<std::pair<double, double>>& region,
                                                 std::size_t per_dim, const InitConfig& config,
                                                 std::uint64_t seed);

/// Builds the model from the data and runs every stage.
/// Throws AllStagesFailed if no stage output has a finite single-shooting loss.
TrainedModel train(const ObservationSet& data, const PipelineConfig& config);

/// Runs the optimization stages from given initial params (the init stage
/// is reported as "pretrained").
TrainedModel train_from(const ObservationSet& data, RhsPtr rhs, std::vector<double> initial_params,
                        const PipelineConfig& config);

/// Serialized model without wall-clock fields, so equal runs give equal bytes.
nlohmann::json to_json(const TrainedModel& model);
TrainedModel trained_model_from_json(const nlohmann::json& doc);

/// One line per stage: name, status, start loss, end loss, evals, seconds.
std::string stage_table(const TrainedModel& model);

/// Stage-independent seed stream derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace chaosode
