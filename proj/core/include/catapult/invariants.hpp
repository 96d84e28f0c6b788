#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "catapult/models.hpp"
#include "catapult/training.hpp"

namespace catapult {

/// Which norm-like quantity obeys Q_{t+1} - Q_t = eta z_t^2 (eta K_t - 4).
enum class TrackedNorm {
  full,           // theta^2, K = H (pure quadratic, homogenous net)
  reduced,        // theta_+^2 over the frozen P+ coordinates, K = H (1d ReLU)
  bias_combined,  // theta^2 + (phi.theta)^2/phi^2, K = H + phi^2 (with-bias)
};

struct NormRunOptions {
  TrainConfig train;
  /// Evaluate H_t with this sigma'(0) while the gradient keeps the net's own
  /// value. Test hook for the negative control; HomogenousNet only.
  std::optional<double> ntk_slope_at_zero;
};

struct NormRunResult {
  double max_residual = 0.0;  // max relative residual of the update identity
  bool monotone = true;       // tracked quantity never increased
  bool frozen_complement = true;  // reduced: P- weights bit-identical throughout
  Termination termination = Termination::step_limit;
  std::int64_t steps = 0;
  double initial = 0.0;  // Q_0
  double final = 0.0;    // Q at the last step
  double max_value = 0.0;
};

/// Trains a single-datapoint model with label 0 and checks the weight-norm
/// update identity at every step. The increment is evaluated from the exact
/// step Delta = -eta grad as sum Delta(2 theta + Delta), which avoids the
/// cancellation of differencing two stored norms.
NormRunResult run_norm_identity(Model& model, const Dataset& data, TrackedNorm tracked,
                                const NormRunOptions& options);

struct InvariantOutcome {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct CheckSuiteOptions {
  std::uint64_t seed = 0;
  int seeds = 5;
  Eigen::Index n = 64;
  /// eta * lambda_max(H_0) for the training runs; inside the catapult window.
  double eta_lambda0 = 2.5;
  std::int64_t max_steps = 2000;
  /// Negative control: plant an exact zero first-layer weight and evaluate the
  /// NTK with a wrong sigma'(0).
  bool corrupt_slope_at_zero = false;
};

/// "default": weight-norm identities, frozen ReLU complement, update
/// recursions and the linearized predictor. "zeta0": linear-model freezing.
std::vector<InvariantOutcome> run_check_suite(const std::string& suite,
                                              const CheckSuiteOptions& options);

}  // namespace catapult
