#include "catapult/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace catapult {

void TrainConfig::validate() const {
  if (!(std::isfinite(eta) && eta > 0.0)) throw InvalidInput("training.eta must be > 0");
  if (max_steps < 1) throw InvalidInput("training.max_steps must be >= 1");
  if (!(convergence_tol > 0.0)) throw InvalidInput("training.convergence_tol must be > 0");
  if (!(divergence_threshold > 0.0))
    throw InvalidInput("training.divergence_threshold must be > 0");
  if (ntk_eval_interval < 1) throw InvalidInput("training.ntk_eval_interval must be >= 1");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::diverged: return "diverged";
    case Termination::step_limit: return "step_limit";
  }
  return "?";
}

double Trajectory::max_loss() const {
  double m = 0.0;
  for (double l : loss)
    if (std::isfinite(l)) m = std::max(m, l);
  return m;
}

double mse_loss(const Vector& outputs, const Vector& labels) {
  if (outputs.size() != labels.size() || outputs.size() < 1)
    throw InvalidInput("mse_loss: outputs and labels need equal length >= 1");
  return 0.5 * (outputs - labels).squaredNorm() / static_cast<double>(outputs.size());
}

double ntk_lambda_max(const Model& model, const Dataset& data) {
  const SymmetricMatrix h = model.ntk(data);
  if (h.order() == 1) return h(0, 0);
  return sym_eigen(h).values(0);
}

bool gd_step(Model& model, const Dataset& data, double eta) {
  const Model::Evaluation e = model.evaluate(data);
  Vector next = model.parameters() - eta * e.gradient;
  if (!next.allFinite()) return false;
  model.set_parameters(next);
  return true;
}

Trajectory train(Model& model, const Dataset& data, const TrainConfig& config) {
  config.validate();
  data.validate();
  Trajectory traj;
  traj.eta = config.eta;

  const bool has_reduced = model.reduced_weight_norm().has_value();
  std::int64_t t = 0;
  while (true) {
    const Model::Evaluation e = model.evaluate(data);
    const double loss = mse_loss(e.outputs, data.labels);
    traj.loss.push_back(loss);
    traj.weight_norm.push_back(model.weight_norm());
    if (has_reduced) traj.reduced_weight_norm.push_back(*model.reduced_weight_norm());
    if (config.record_outputs) traj.outputs.push_back(e.outputs);

    const bool diverged = !std::isfinite(loss) || loss > config.divergence_threshold;
    const bool converged =
        !diverged && t > 0 && std::abs(loss - traj.loss[traj.loss.size() - 2]) < config.convergence_tol;
    const bool at_limit = t >= config.max_steps;
    const bool last = diverged || converged || at_limit;

    if (!diverged && (t % config.ntk_eval_interval == 0 || last)) {
      const double lam = ntk_lambda_max(model, data);
      if (std::isfinite(lam)) traj.ntk.push_back({t, lam});
    }

    if (diverged) {
      traj.termination = Termination::diverged;
      break;
    }
    if (converged) {
      traj.termination = Termination::converged;
      break;
    }
    if (at_limit) {
      traj.termination = Termination::step_limit;
      break;
    }

    Vector next = model.parameters() - config.eta * e.gradient;
    if (!next.allFinite()) {
      traj.termination = Termination::diverged;
      break;
    }
    model.set_parameters(next);
    ++t;
  }
  traj.steps_taken = t;
  return traj;
}

// ---------------------------------------------------------------------------

namespace {

double relative(double diff, double scale) {
  if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / scale;
}

}  // namespace

ConsistencyReport quad_update_consistency(const QuadraticModel& model, const Dataset& data,
                                          double eta, int steps) {
  if (model.variant() == QuadraticVariant::generic)
    throw InvalidInput("quad_update_consistency: needs a pure or with-bias model");
  if (steps < 1) throw InvalidInput("quad_update_consistency: steps must be >= 1");

  QuadraticModel m = model;
  const Eigen::Index d_count = m.datapoints();
  const double dd = static_cast<double>(d_count);
  const double zeta = m.zeta();
  const std::vector<Matrix>& psi = m.meta_features();
  const Matrix& phi = m.features();
  const bool with_bias = m.variant() == QuadraticVariant::with_bias;

  ConsistencyReport report;
  const Matrix h0 = m.ntk(data).matrix();
  const Matrix phi_gram = phi.transpose() * phi;
  const Vector bias0 = phi.transpose() * m.theta();
  Vector bias_increment = Vector::Zero(d_count);  // -(eta/D) sum_i Phi^T Phi eps_i
  Vector bias_increment_scale = Vector::Zero(d_count);
  if (with_bias) report.max_bias_deviation = 0.0;

  Vector z = m.forward_all();
  Vector eps = z - data.labels;
  Matrix h = h0;
  for (int t = 0; t < steps; ++t) {
    // w_alpha = psi_alpha theta_t, s = sum_gamma eps_gamma w_gamma.
    Matrix w(m.width(), d_count);
    for (Eigen::Index a = 0; a < d_count; ++a) w.col(a) = psi[a] * m.theta();
    const Vector s = w * eps;
    Matrix psi_s(m.width(), d_count);
    for (Eigen::Index a = 0; a < d_count; ++a) psi_s.col(a) = psi[a] * s;

    Vector eps_pred = eps - eta * (h * eps);
    for (Eigen::Index a = 0; a < d_count; ++a)
      eps_pred(a) += eta * eta * zeta * zeta * zeta / (2.0 * dd * dd) * s.dot(psi_s.col(a));

    // w_alpha^T psi_beta s = theta psi_alpha psi_beta psi_gamma theta eps_gamma.
    const Matrix cross = w.transpose() * psi_s;
    Matrix h_pred = h;
    h_pred -= eta * zeta * zeta * zeta / (dd * dd) * (cross + cross.transpose());
    h_pred += eta * eta * std::pow(zeta, 4) / (dd * dd * dd) * (psi_s.transpose() * psi_s);

    if (with_bias) {
      const Vector inc = -(eta / dd) * (phi_gram * eps);
      bias_increment += inc;
      bias_increment_scale += inc.cwiseAbs();
    }

    if (!gd_step(m, data, eta))
      throw InvalidInput("quad_update_consistency: non-finite update at step " + std::to_string(t));
    const Vector z_next = m.forward_all();
    if (!z_next.allFinite())
      throw InvalidInput("quad_update_consistency: outputs overflowed at step " + std::to_string(t));
    const Vector eps_next = z_next - data.labels;
    const Matrix h_next = m.ntk(data).matrix();

    const double eps_scale = std::max({eps_next.norm(), eps.norm(), z_next.norm()});
    report.max_error_deviation =
        std::max(report.max_error_deviation, relative((eps_pred - eps_next).norm(), eps_scale));
    report.max_ntk_deviation =
        std::max(report.max_ntk_deviation, relative((h_pred - h_next).norm(), h_next.norm()));
    if (h_next == h0) ++report.frozen_ntk_steps;

    if (with_bias) {
      const Vector bias_direct = phi.transpose() * m.theta();
      const Vector bias_closed = bias0 + bias_increment;
      const double scale = std::max(bias_direct.norm(), bias0.norm() + bias_increment_scale.norm());
      report.max_bias_deviation = std::max(*report.max_bias_deviation,
                                           relative((bias_closed - bias_direct).norm(), scale));
    }

    eps = eps_next;
    h = h_next;
    ++report.steps;
  }
  return report;
}

}  // namespace catapult
