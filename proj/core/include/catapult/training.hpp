#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "catapult/models.hpp"

namespace catapult {

struct TrainConfig {
  double eta = 0.0;
  std::int64_t max_steps = 100000;
  double convergence_tol = 1e-8;
  double divergence_threshold = 1e10;
  /// lambda_max(H_t) is evaluated when t is a multiple of this and at the
  /// last recorded step.
  std::int64_t ntk_eval_interval = 1;
  bool record_outputs = false;

  /// Throws InvalidInput on eta <= 0, max_steps < 1, non-positive tolerances
  /// or interval < 1.
  void validate() const;
};

enum class Termination { converged, diverged, step_limit };

const char* to_string(Termination t);

struct NtkSample {
  std::int64_t step;
  double lambda_max;
};

/// Per-step record of one run. Index t of each per-step series is the state
/// after t updates; series have steps_taken + 1 entries.
struct Trajectory {
  std::vector<double> loss;
  std::vector<double> weight_norm;
  std::vector<double> reduced_weight_norm;  // empty unless the model exposes one
  std::vector<NtkSample> ntk;               // lambda_max(H_t) at evaluation steps
  std::vector<Vector> outputs;              // filled when record_outputs is set
  Termination termination = Termination::step_limit;
  std::int64_t steps_taken = 0;
  double eta = 0.0;

  double lambda0() const { return ntk.empty() ? 0.0 : ntk.front().lambda_max; }
  /// lambda_max at the last evaluated step.
  double final_lambda() const { return ntk.empty() ? 0.0 : ntk.back().lambda_max; }
  double max_loss() const;
};

/// (1/2D) sum (z - y)^2.
double mse_loss(const Vector& outputs, const Vector& labels);

/// Largest NTK eigenvalue via the dense symmetric eigensolver.
double ntk_lambda_max(const Model& model, const Dataset& data);

/// theta <- theta - eta * grad L. Returns false (leaving the model untouched)
/// if the update is not finite.
bool gd_step(Model& model, const Dataset& data, double eta);

/// Full-batch gradient descent on the MSE loss. The model is left at its
/// final state.
///
/// Stops as converged when |L_{t+1} - L_t| < convergence_tol, as diverged when
/// L_t exceeds divergence_threshold or is not finite, and otherwise after
/// max_steps updates.
Trajectory train(Model& model, const Dataset& data, const TrainConfig& config);

struct ConsistencyReport {
  double max_error_deviation = 0.0;  // epsilon recursion vs recomputation
  double max_ntk_deviation = 0.0;    // H recursion vs recomputation
  /// phi_alpha^T theta_t closed form vs recomputation; with-bias models only.
  std::optional<double> max_bias_deviation;
  int steps = 0;
  /// Steps whose H was bitwise identical to H_0 (all of them when zeta = 0).
  int frozen_ntk_steps = 0;
};

/// Advances epsilon_t and H_t one step at a time through the exact update
/// recursions (including the zeta^3 and zeta^4 terms) and compares each
/// prediction with direct recomputation at theta_{t+1}. Deviations are
/// norm-wise relative. Requires a pure or with-bias model.
ConsistencyReport quad_update_consistency(const QuadraticModel& model, const Dataset& data,
                                          double eta, int steps);

}  // namespace catapult
