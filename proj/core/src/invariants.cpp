#include "catapult/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "catapult/analysis.hpp"
#include "catapult/datasets.hpp"

namespace catapult {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

double relative_residual(double lhs, double rhs) {
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  return scale == 0.0 ? 0.0 : std::abs(lhs - rhs) / scale;
}

}  // namespace

NormRunResult run_norm_identity(Model& model, const Dataset& data, TrackedNorm tracked,
                                const NormRunOptions& options) {
  options.train.validate();
  require(data.size() == 1 && data.labels(0) == 0.0,
          "run_norm_identity: needs a single datapoint with label 0");
  const double eta = options.train.eta;

  Vector mask;  // 1 on tracked coordinates
  Vector phi;
  double phi2 = 0.0;
  HomogenousNet* net = dynamic_cast<HomogenousNet*>(&model);
  switch (tracked) {
    case TrackedNorm::full: break;
    case TrackedNorm::reduced: {
      require(net != nullptr && net->activation().is_relu() && net->input_dim() == 1,
              "run_norm_identity: reduced norm needs a 1d ReLU HomogenousNet");
      if (!net->projector()) net->freeze_projector();
      const Vector& p = net->projector()->p_plus;
      mask.resize(model.parameter_count());
      mask << p, p;
      break;
    }
    case TrackedNorm::bias_combined: {
      const auto* q = dynamic_cast<const QuadraticModel*>(&model);
      require(q != nullptr && q->variant() == QuadraticVariant::with_bias,
              "run_norm_identity: combined norm needs a with-bias QuadraticModel");
      phi = q->features().col(0);
      phi2 = phi.squaredNorm();
      require(phi2 > 0.0, "run_norm_identity: phi == 0");
      break;
    }
  }
  if (options.ntk_slope_at_zero)
    require(net != nullptr, "run_norm_identity: slope override needs a HomogenousNet");

  auto value = [&](const Vector& theta) {
    switch (tracked) {
      case TrackedNorm::full: return theta.squaredNorm();
      case TrackedNorm::reduced: return (theta.array() * mask.array()).matrix().squaredNorm();
      case TrackedNorm::bias_combined: {
        const double pt = phi.dot(theta);
        return theta.squaredNorm() + pt * pt / phi2;
      }
    }
    return 0.0;
  };

  NormRunResult r;
  const Vector theta0 = model.parameters();
  r.initial = value(theta0);
  r.max_value = r.initial;
  double prev_loss = 0.0;
  std::int64_t t = 0;
  while (true) {
    const Model::Evaluation e = model.evaluate(data);
    const double z = e.outputs(0);
    const double loss = mse_loss(e.outputs, data.labels);
    const Vector theta = model.parameters();
    r.final = value(theta);
    r.max_value = std::max(r.max_value, r.final);
    if (!std::isfinite(loss) || loss > options.train.divergence_threshold) {
      r.termination = Termination::diverged;
      break;
    }
    if (t > 0 && std::abs(loss - prev_loss) < options.train.convergence_tol) {
      r.termination = Termination::converged;
      break;
    }
    if (t >= options.train.max_steps) {
      r.termination = Termination::step_limit;
      break;
    }

    double h;
    if (options.ntk_slope_at_zero) {
      HomogenousNet probe = *net;
      Activation act = probe.activation();
      act.slope_at_zero = *options.ntk_slope_at_zero;
      probe.set_activation(act);
      h = probe.ntk(data)(0, 0);
    } else {
      h = model.ntk(data)(0, 0);
    }
    const double k = tracked == TrackedNorm::bias_combined ? h + phi2 : h;

    const Vector delta = -eta * e.gradient;
    double lhs = 0.0;
    switch (tracked) {
      case TrackedNorm::full: lhs = delta.dot(2.0 * theta + delta); break;
      case TrackedNorm::reduced:
        lhs = (mask.array() * delta.array() * (2.0 * theta + delta).array()).sum();
        break;
      case TrackedNorm::bias_combined: {
        const double pd = phi.dot(delta);
        lhs = delta.dot(2.0 * theta + delta) + pd * (2.0 * phi.dot(theta) + pd) / phi2;
        break;
      }
    }
    const double rhs = eta * z * z * (eta * k - 4.0);
    r.max_residual = std::max(r.max_residual, relative_residual(lhs, rhs));
    if (lhs > 0.0) r.monotone = false;

    const Vector next = theta + delta;
    if (!next.allFinite()) {
      r.termination = Termination::diverged;
      break;
    }
    model.set_parameters(next);
    prev_loss = loss;
    ++t;
  }
  r.steps = t;

  if (tracked == TrackedNorm::reduced) {
    const Vector theta = model.parameters();
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      if (mask(i) == 0.0 && theta(i) != theta0(i)) r.frozen_complement = false;
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

QuadraticFeatureMap toy_map(Eigen::Index n_psi, Eigen::Index n_phi, std::uint64_t seed) {
  MetaFeatureSpec spec;
  spec.n_psi = n_psi;
  spec.n_phi = n_phi;
  spec.d = 1;
  spec.scheme = EigenScheme::paired_uniform;
  spec.lo = 1.0;
  spec.hi = 2.0;
  spec.seed = seed;
  return QuadraticFeatureMap(spec);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

InvariantOutcome outcome(std::string name, double measured, double tol, bool ok,
                         std::string detail = {}) {
  return InvariantOutcome{std::move(name), ok, measured, tol, std::move(detail)};
}

TrainConfig check_train(double eta, std::int64_t max_steps) {
  TrainConfig c;
  c.eta = eta;
  c.max_steps = max_steps;
  return c;
}

std::vector<InvariantOutcome> default_suite(const CheckSuiteOptions& o) {
  std::vector<InvariantOutcome> out;
  const Dataset toy = make_toy();
  const double tol = 1e-9;

  double pure_res = 0.0, mlp_res = 0.0, relu_res = 0.0, bias_res = 0.0;
  bool frozen = true;
  for (int s = 0; s < o.seeds; ++s) {
    const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(s);
    Rng rng(seed);
    {
      QuadraticModel m = make_quadratic_model(toy_map(o.n, 0, rng.next_u64()), toy,
                                              std::sqrt(2.0 / static_cast<double>(o.n)), rng);
      NormRunOptions opt{check_train(o.eta_lambda0 / ntk_lambda_max(m, toy), o.max_steps), {}};
      pure_res = std::max(pure_res, run_norm_identity(m, toy, TrackedNorm::full, opt).max_residual);
    }
    {
      QuadraticModel m = make_quadratic_model(toy_map(o.n, 8, rng.next_u64()), toy,
                                              std::sqrt(1.0 / static_cast<double>(o.n)), rng);
      NormRunOptions opt{check_train(o.eta_lambda0 / ntk_lambda_max(m, toy), o.max_steps), {}};
      bias_res = std::max(bias_res,
                          run_norm_identity(m, toy, TrackedNorm::bias_combined, opt).max_residual);
    }
    {
      HomogenousNet net = HomogenousNet::initialize(o.n, 1, Activation::scale_invariant(0.5, 1.0), rng);
      NormRunOptions opt{check_train(o.eta_lambda0 / ntk_lambda_max(net, toy), o.max_steps), {}};
      if (o.corrupt_slope_at_zero) {
        Matrix u = net.u();
        u(0, 0) = 0.0;
        net = HomogenousNet(u, net.v(), net.activation());
        opt.ntk_slope_at_zero = net.activation().slope_at_zero + 0.25;
      }
      mlp_res = std::max(mlp_res, run_norm_identity(net, toy, TrackedNorm::full, opt).max_residual);
    }
    {
      HomogenousNet net = HomogenousNet::initialize(o.n, 1, Activation::relu(), rng);
      NormRunOptions opt{check_train(o.eta_lambda0 / ntk_lambda_max(net, toy), o.max_steps), {}};
      const NormRunResult r = run_norm_identity(net, toy, TrackedNorm::reduced, opt);
      relu_res = std::max(relu_res, r.max_residual);
      frozen = frozen && r.frozen_complement;
    }
  }
  out.push_back(outcome("weight_norm_identity.pure_quadratic", pure_res, tol, pure_res < tol));
  out.push_back(outcome("weight_norm_identity.quadratic_with_bias", bias_res, tol, bias_res < tol,
                        "tracks theta^2 + (phi.theta)^2/phi^2"));
  out.push_back(outcome("weight_norm_identity.homogenous_mlp", mlp_res, tol, mlp_res < tol,
                        o.corrupt_slope_at_zero ? "ntk evaluated with a corrupted sigma'(0)" : ""));
  out.push_back(outcome("weight_norm_identity.relu_reduced", relu_res, tol, relu_res < tol));
  out.push_back(outcome("relu_frozen_complement", frozen ? 0.0 : 1.0, 0.0, frozen,
                        "u_- and v_- bit-identical across all steps"));

  // Update recursions on a multi-datapoint instance.
  {
    Rng rng(o.seed + 1000);
    const Dataset data = make_random(2, 4, 0.5, rng.next_u64());
    MetaFeatureSpec spec;
    spec.n_psi = std::min<Eigen::Index>(o.n, 32);
    spec.d = 2;
    spec.seed = rng.next_u64();
    QuadraticModel pure = make_quadratic_model(QuadraticFeatureMap(spec), data,
                                               std::sqrt(2.0 / static_cast<double>(spec.n_psi)), rng);
    const double eta = 1.8 / ntk_lambda_max(pure, data);
    const ConsistencyReport rp = quad_update_consistency(pure, data, eta, 50);
    const double dev = std::max(rp.max_error_deviation, rp.max_ntk_deviation);
    out.push_back(outcome("update_recursion.pure", dev, tol, dev < tol));

    spec.n_phi = 6;
    spec.seed = rng.next_u64();
    QuadraticModel bias = make_quadratic_model(QuadraticFeatureMap(spec), data,
                                               std::sqrt(1.0 / static_cast<double>(spec.n_psi)), rng);
    const ConsistencyReport rb =
        quad_update_consistency(bias, data, 1.8 / ntk_lambda_max(bias, data), 50);
    const double devb = std::max({rb.max_error_deviation, rb.max_ntk_deviation,
                                  rb.max_bias_deviation.value_or(0.0)});
    out.push_back(outcome("update_recursion.with_bias", devb, tol, devb < tol,
                          "includes the closed form for phi.theta_t"));
  }

  // Linearized predictor at zeta = 0 is exact.
  {
    Rng rng(o.seed + 2000);
    const Dataset data = make_random(2, 4, 0.5, rng.next_u64());
    MetaFeatureSpec spec;
    spec.n_psi = 8;
    spec.n_phi = 16;
    spec.d = 2;
    spec.seed = rng.next_u64();
    const QuadraticModel m = make_quadratic_model(QuadraticFeatureMap(spec), data, 0.0, rng);
    const double eta = 1.5 / ntk_lambda_max(m, data);
    const LinearizedPrediction p = linearized_predict(m, data, eta, 50);
    double worst = 0.0;
    for (std::size_t t = 0; t < p.loss.size(); ++t)
      worst = std::max(worst, relative_residual(p.loss[t], p.true_loss[t]));
    out.push_back(outcome("linearized_predictor.zeta0_exact", worst, tol, worst < tol));
  }
  return out;
}

std::vector<InvariantOutcome> zeta0_suite(const CheckSuiteOptions& o) {
  std::vector<InvariantOutcome> out;
  Rng rng(o.seed);
  const Dataset data = make_random(2, 4, 0.5, rng.next_u64());
  MetaFeatureSpec spec;
  spec.n_psi = 8;
  spec.n_phi = std::max<Eigen::Index>(o.n, 8);
  spec.d = 2;
  spec.seed = rng.next_u64();
  QuadraticModel m = make_quadratic_model(QuadraticFeatureMap(spec), data, 0.0, rng);
  const double eta = 1.5 / ntk_lambda_max(m, data);

  const Matrix h0 = m.ntk(data).matrix();
  double drift = 0.0;
  for (int t = 0; t < 100; ++t) {
    gd_step(m, data, eta);
    drift = std::max(drift, (m.ntk(data).matrix() - h0).cwiseAbs().maxCoeff());
  }
  out.push_back(outcome("ntk_frozen.zeta0", drift, 1e-12, drift <= 1e-12,
                        "max |H_t - H_0| over 100 steps"));

  const ConsistencyReport rep = quad_update_consistency(m, data, eta, 50);
  out.push_back(outcome("update_recursion.zeta0_frozen", rep.steps - rep.frozen_ntk_steps, 0.0,
                        rep.frozen_ntk_steps == rep.steps,
                        fmt(rep.frozen_ntk_steps) + " of " + fmt(rep.steps) + " steps bit-identical"));

  const LinearizedPrediction p = linearized_predict(m, data, eta, 50);
  double worst = 0.0;
  for (std::size_t t = 0; t < p.loss.size(); ++t)
    worst = std::max(worst, relative_residual(p.loss[t], p.true_loss[t]));
  out.push_back(outcome("linearized_predictor.zeta0_exact", worst, 1e-9, worst < 1e-9));
  return out;
}

}  // namespace

std::vector<InvariantOutcome> run_check_suite(const std::string& suite,
                                              const CheckSuiteOptions& options) {
  require(options.seeds >= 1, "check.seeds must be >= 1");
  require(options.n >= 2, "check.n must be >= 2");
  if (suite == "default") return default_suite(options);
  if (suite == "zeta0") return zeta0_suite(options);
  throw InvalidInput("check.suite: unknown suite '" + suite + "' (expected default or zeta0)");
}

}  // namespace catapult
