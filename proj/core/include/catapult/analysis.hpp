#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "catapult/models.hpp"
#include "catapult/training.hpp"

namespace catapult {

/// non_converged marks step-limit runs, which carry no phase.
enum class Phase { lazy, catapult, divergent, non_converged };

const char* to_string(Phase p);

/// divergent if the run diverged; catapult if it converged with
/// max_t L_t > spike_factor * L_0; lazy if it converged otherwise.
Phase classify_phase(const Trajectory& trajectory, double spike_factor = 1.5);

struct GeneralizationReport {
  double train_loss = 0.0;
  double test_loss = 0.0;
  double gap = 0.0;       // test - train
  double accuracy = 0.0;  // fraction with sign(z) == sign(y) on the test split
};

GeneralizationReport generalization_report(const Vector& train_outputs, const Vector& train_labels,
                                           const Vector& test_outputs, const Vector& test_labels);

/// For models that evaluate arbitrary inputs (the MLP families). Throws
/// InvalidInput if the dataset has no test split or the model is a
/// quadratic model (whose features are bound to its training points).
GeneralizationReport generalization_report(const Model& model, const Dataset& data);

/// Fraction of zero post-activation entries per ReLU layer, averaged over
/// the rows of inputs.
std::vector<double> sparsity(const DeepReluNet& net, const Matrix& inputs);
std::vector<double> sparsity(const HomogenousNet& net, const Matrix& inputs);

struct SweepRecord {
  double eta = 0.0;
  double eta_lambda0 = 0.0;
  Phase phase = Phase::non_converged;
  Termination termination = Termination::step_limit;
  std::int64_t steps_taken = 0;
  std::string status = "ok";  // error text when the run failed
  double max_loss_ratio = 0.0;    // max_t L_t / L_0
  double max_weight_ratio = 0.0;  // max_t theta_t^2 / theta_0^2
  // Final-state values; absent for divergent or failed runs.
  std::optional<double> eta_lambda_final;
  std::optional<double> weight_ratio;
  std::optional<double> train_loss_final;
  std::optional<double> test_loss_final;
  std::optional<double> generalization_gap;
  std::optional<double> test_accuracy;
  std::vector<double> sparsity;
  std::optional<Trajectory> trajectory;
};

struct SweepResult {
  double lambda0 = 0.0;  // lambda_max(H_0) of the shared initialization
  double theta0_sq = 0.0;
  std::vector<SweepRecord> records;  // in grid order
};

using ModelFactory = std::function<std::unique_ptr<Model>()>;
/// Test-split outputs for a trained model; used when the model cannot
/// evaluate test inputs itself.
using TestOutputs = std::function<Vector(const Model&)>;

struct SweepOptions {
  int jobs = 1;
  bool keep_trajectories = false;
  double spike_factor = 1.5;
  TestOutputs test_outputs;
};

/// Trains a fresh model from the factory for every eta. The factory must
/// return identical initializations on every call. Runs are independent and
/// may execute on `jobs` threads; records are merged in grid order.
SweepResult sweep(const ModelFactory& factory, const Dataset& data, const std::vector<double>& etas,
                  const TrainConfig& base, const SweepOptions& options = {});

/// eta = x / lambda0 for each grid value x.
std::vector<double> resolve_eta_lambda0_grid(const std::vector<double>& grid, double lambda0);

struct LinearizedPrediction {
  Vector eigenvalues;   // of H_0, descending
  Matrix eigenvectors;  // columns e^i
  Vector c0;            // eps_0 in the eigenbasis
  std::vector<Vector> errors;      // predicted eps_t, t = 0..horizon
  std::vector<double> loss;        // predicted L_t
  std::vector<double> true_loss;   // simulated L_t (NaN after divergence)
  std::vector<double> true_output_norm;  // ||z_t||
  double breakdown_scale = 0.0;    // zeta^{-1} or sqrt(n); +inf when zeta == 0
  /// First t whose true ||z_t|| >= fraction * breakdown_scale; horizon + 1 if none.
  std::int64_t validity_horizon = 0;
};

/// eps_t ~ sum_i (1 - eta lambda_i)^t c^i_0 e^i from the H_0 eigenbasis,
/// compared against horizon steps of the full simulation.
LinearizedPrediction linearized_predict(const Model& model, const Dataset& data, double eta,
                                        std::int64_t horizon, double fraction = 0.01);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace catapult
