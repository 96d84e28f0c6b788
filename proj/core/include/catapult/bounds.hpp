#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "catapult/models.hpp"

namespace catapult {

enum class BoundMethod { table1, omega, psi_eff, bias_eff, mlp_multi };

const char* to_string(BoundMethod m);

/// Learning-rate window for one model family at its current weights theta_0.
/// The catapult phase is guaranteed (or, for heuristic reports, predicted)
/// for catapult_lower < eta < sufficient_upper.
struct BoundReport {
  std::string family;
  BoundMethod method = BoundMethod::table1;
  bool proven = true;  // false marks a heuristic bound
  double lambda_max_h0 = 0.0;
  double catapult_lower = 0.0;  // 2 / lambda_max(H_0)
  double sufficient_upper = 0.0;
  std::optional<double> divergence_lower;
  bool window_nonempty = false;
  std::vector<std::string> flags;
  /// Quantities that entered the formula, in evaluation order.
  std::vector<std::pair<std::string, double>> inputs;

  double input(const std::string& key) const;
  bool has_flag(const std::string& flag) const;
};

struct BoundOptions {
  /// Power iteration settings for lambda_max(Omega).
  PowerIterationOptions power{1e-12, 200000};
  std::uint64_t power_seed = 0x0c0ffee;
};

/// Single datapoint, pure model: upper 4/(zeta^2 theta0^2 lambda_max(psi^2)),
/// divergence 4/(zeta^2 theta0^2 lambda_min(psi^2)) when lambda_min > 0.
BoundReport bound_pure_quadratic(const QuadraticModel& model, const Dataset& data);

/// Window non-emptiness in expectation over N(0, I) weights:
/// lambda_max(psi^2) < (2/n) Tr(psi^2).
bool pure_expected_window_nonempty(const Matrix& psi);

/// Single datapoint, with-bias model:
/// upper 4/(2 phi^2 + zeta^2 lambda_max(psi^2) (theta0^2 + (phi.theta0)^2/phi^2)).
BoundReport bound_quadratic_with_bias(const QuadraticModel& model, const Dataset& data);

/// Single datapoint homogenous net: upper 4n/(a_+^2 x^2 theta0^2), divergence
/// 4n/(a_-^2 x^2 theta0^2) when a_- > 0.
BoundReport bound_homogenous_mlp(const HomogenousNet& net, const Dataset& data);

/// Single 1d datapoint ReLU net: window (2/H_0, 4/H_0).
BoundReport bound_relu(const HomogenousNet& net, const Dataset& data);

/// Method 1: upper 4/(lambda_max(Omega) theta0^2) with lambda_max(Omega)
/// from power iteration on the implicit matvec.
BoundReport bound_multi_omega(const QuadraticModel& model, const Dataset& data,
                              const BoundOptions& options = {});

/// Method 2 (heuristic): psi_eff = D^{-1/2} sum_alpha e^max_alpha psi_alpha.
BoundReport bound_multi_psi_eff(const QuadraticModel& model, const Dataset& data);

/// With-bias effective features (heuristic); falls back to Method 2 when
/// phi_eff = 0.
BoundReport bound_multi_bias_eff(const QuadraticModel& model, const Dataset& data);

/// Homogenous net, many datapoints: upper 4nD/(a_+^2 lambda_max(X X^T) theta0^2).
BoundReport bound_mlp_multi(const HomogenousNet& net, const Dataset& data);

/// Implicit Omega operator of dimension nD:
/// (Omega v)_alpha = (zeta^2/D) psi_alpha sum_beta psi_beta v_beta.
LinearOperator omega_operator(const QuadraticModel& model);
/// Dense (nD) x (nD) Omega; for cross-checks on small instances.
Matrix omega_dense(const QuadraticModel& model);

/// Expectation check for the homogenous net at x = 1:
/// E[2 H_0 - (a_+^2/n) theta_0^2] = 2 a_-^2, positive iff a_- != 0.
double homogenous_expected_margin(const Activation& activation);

}  // namespace catapult
