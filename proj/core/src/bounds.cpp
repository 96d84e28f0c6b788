#include "catapult/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace catapult {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

struct SquaredSpectrum {
  double max = 0.0;
  double min = 0.0;
  double max_abs_eigenvalue = 0.0;
};

// Extremes of the spectrum of psi^2 from the eigenvalues of psi.
SquaredSpectrum squared_spectrum(const Matrix& psi) {
  const Vector lam = sym_eigen(SymmetricMatrix::symmetrized(psi)).values;
  SquaredSpectrum s;
  s.max = std::max(lam(0) * lam(0), lam(lam.size() - 1) * lam(lam.size() - 1));
  s.min = lam.cwiseAbs2().minCoeff();
  s.max_abs_eigenvalue = std::sqrt(s.max);
  return s;
}

double top_eigenvalue(const SymmetricMatrix& h) {
  return h.order() == 1 ? h(0, 0) : sym_eigen(h).values(0);
}

void finish(BoundReport& r) {
  r.catapult_lower = 2.0 / r.lambda_max_h0;
  r.window_nonempty = r.sufficient_upper > r.catapult_lower;
}

// Unit top eigenvector of H_0 with the lowest-index tie-break; flags a
// degenerate top eigenspace.
Vector top_eigenvector(const SymmetricMatrix& h, BoundReport& r) {
  const EigenDecomposition eig = sym_eigen(h);
  r.lambda_max_h0 = eig.values(0);
  if (eig.values.size() > 1 &&
      eig.values(0) - eig.values(1) <= 1e-10 * std::max(std::abs(eig.values(0)), 1e-300))
    r.flags.push_back("degenerate_top_eigenspace: lowest-index eigenvector chosen");
  return eig.vectors.col(0);
}

}  // namespace

const char* to_string(BoundMethod m) {
  switch (m) {
    case BoundMethod::table1: return "table1";
    case BoundMethod::omega: return "omega";
    case BoundMethod::psi_eff: return "psi_eff";
    case BoundMethod::bias_eff: return "bias_eff";
    case BoundMethod::mlp_multi: return "mlp_multi";
  }
  return "?";
}

double BoundReport::input(const std::string& key) const {
  for (const auto& [k, v] : inputs)
    if (k == key) return v;
  throw InvalidInput("BoundReport: no input named " + key);
}

bool BoundReport::has_flag(const std::string& flag) const {
  return std::any_of(flags.begin(), flags.end(),
                     [&](const std::string& f) { return f.rfind(flag, 0) == 0; });
}

BoundReport bound_pure_quadratic(const QuadraticModel& model, const Dataset& data) {
  require(model.variant() == QuadraticVariant::pure, "bound_pure_quadratic: needs a pure model");
  require(model.datapoints() == 1, "bound_pure_quadratic: needs a single datapoint");
  BoundReport r;
  r.family = "pure_quadratic";
  const double zeta2 = model.zeta() * model.zeta();
  const double theta2 = model.weight_norm();
  const SquaredSpectrum s = squared_spectrum(model.meta_feature(0));
  r.lambda_max_h0 = model.ntk(data)(0, 0);
  r.sufficient_upper = 4.0 / (zeta2 * theta2 * s.max);
  // lambda_min(psi^2) at rounding level counts as zero.
  const double zero_level =
      std::pow(static_cast<double>(model.width()) * std::numeric_limits<double>::epsilon() *
                   s.max_abs_eigenvalue,
               2);
  if (s.min > zero_level)
    r.divergence_lower = 4.0 / (zeta2 * theta2 * s.min);
  else
    r.flags.push_back("divergence_lower_absent: lambda_min(psi^2) == 0");
  const double trace_psi2 = model.meta_feature(0).squaredNorm();
  if (!pure_expected_window_nonempty(model.meta_feature(0)))
    r.flags.push_back("expected_window_empty: lambda_max(psi^2) >= (2/n) Tr(psi^2)");
  r.inputs = {{"zeta", model.zeta()},
              {"n", static_cast<double>(model.width())},
              {"theta0_sq", theta2},
              {"lambda_max_psi_sq", s.max},
              {"lambda_min_psi_sq", s.min},
              {"trace_psi_sq", trace_psi2},
              {"H0", r.lambda_max_h0}};
  finish(r);
  return r;
}

bool pure_expected_window_nonempty(const Matrix& psi) {
  const SquaredSpectrum s = squared_spectrum(psi);
  return s.max < 2.0 / static_cast<double>(psi.rows()) * psi.squaredNorm();
}

BoundReport bound_quadratic_with_bias(const QuadraticModel& model, const Dataset& data) {
  require(model.variant() == QuadraticVariant::with_bias,
          "bound_quadratic_with_bias: needs a with-bias model");
  require(model.datapoints() == 1, "bound_quadratic_with_bias: needs a single datapoint");
  const Vector phi = model.features().col(0);
  const double phi2 = phi.squaredNorm();
  require(phi2 > 0.0, "bound_quadratic_with_bias: phi == 0, use the pure bound");
  BoundReport r;
  r.family = "quadratic_with_bias";
  const double zeta2 = model.zeta() * model.zeta();
  const double theta2 = model.weight_norm();
  const double phi_theta = phi.dot(model.theta());
  const SquaredSpectrum s = squared_spectrum(model.meta_feature(0));
  const double combined = theta2 + phi_theta * phi_theta / phi2;
  r.lambda_max_h0 = model.ntk(data)(0, 0);
  r.sufficient_upper = 4.0 / (2.0 * phi2 + zeta2 * s.max * combined);
  r.inputs = {{"zeta", model.zeta()},          {"n", static_cast<double>(model.width())},
              {"theta0_sq", theta2},            {"phi_sq", phi2},
              {"phi_dot_theta0", phi_theta},    {"lambda_max_psi_sq", s.max},
              {"combined_norm", combined},      {"H0", r.lambda_max_h0}};
  finish(r);
  return r;
}

BoundReport bound_homogenous_mlp(const HomogenousNet& net, const Dataset& data) {
  require(data.size() == 1 && data.dim() == 1 && net.input_dim() == 1,
          "bound_homogenous_mlp: needs a single 1d datapoint");
  BoundReport r;
  r.family = "homogenous_mlp";
  const Activation& act = net.activation();
  const double n = static_cast<double>(net.width());
  const double x2 = data.inputs(0, 0) * data.inputs(0, 0);
  const double theta2 = net.weight_norm();
  require(x2 > 0.0, "bound_homogenous_mlp: x == 0 gives a frozen model");
  r.lambda_max_h0 = net.ntk(data)(0, 0);
  r.sufficient_upper = 4.0 * n / (act.a_plus * act.a_plus * x2 * theta2);
  if (act.a_minus > 0.0) {
    r.divergence_lower = 4.0 * n / (act.a_minus * act.a_minus * x2 * theta2);
  } else {
    r.proven = false;
    r.flags.push_back("relu_special_case: a_minus == 0 degenerates this window, use bound_relu");
  }
  if (data.labels(0) != 0.0) r.flags.push_back("nonzero_label: guarantee is derived for y == 0");
  r.inputs = {{"n", n},
              {"a_minus", act.a_minus},
              {"a_plus", act.a_plus},
              {"x_sq", x2},
              {"theta0_sq", theta2},
              {"H0", r.lambda_max_h0}};
  finish(r);
  return r;
}

BoundReport bound_relu(const HomogenousNet& net, const Dataset& data) {
  require(data.size() == 1 && data.dim() == 1 && net.input_dim() == 1,
          "bound_relu: needs a single 1d datapoint");
  require(net.activation().is_relu(), "bound_relu: needs a ReLU activation");
  BoundReport r;
  r.family = "relu";
  const ReluProjectorDecomposition proj = relu_project(net);
  const double reduced = (proj.p_plus.array() * net.u().col(0).array()).matrix().squaredNorm() +
                         (proj.p_plus.array() * net.v().array()).matrix().squaredNorm();
  const double h0 = net.ntk(data)(0, 0);
  require(h0 > 0.0, "bound_relu: H_0 == 0 (no active neurons), bounds undefined");
  r.lambda_max_h0 = h0;
  r.sufficient_upper = 4.0 / h0;
  r.flags.push_back(
      "empirical_note: convergence observed up to eta*H0 ~ 12 is not guaranteed by this bound");
  if (data.labels(0) != 0.0) r.flags.push_back("nonzero_label: guarantee is derived for y == 0");
  const double n = static_cast<double>(net.width());
  r.inputs = {{"n", n},
              {"x", data.inputs(0, 0)},
              {"reduced_theta0_sq", reduced},
              {"reduced_theta0_sq_over_n", reduced / n},
              {"H0", h0}};
  finish(r);
  return r;
}

LinearOperator omega_operator(const QuadraticModel& model) {
  const Eigen::Index n = model.width();
  const Eigen::Index d = model.datapoints();
  const double scale = model.zeta() * model.zeta() / static_cast<double>(d);
  // The operator keeps its own copy so it may outlive the model.
  auto owned = std::make_shared<std::vector<Matrix>>(model.meta_features());
  return LinearOperator{n * d, [owned, n, d, scale](const Vector& in, Vector& out) {
                          Vector acc = Vector::Zero(n);
                          for (Eigen::Index b = 0; b < d; ++b)
                            acc.noalias() += (*owned)[b] * in.segment(b * n, n);
                          out.resize(n * d);
                          for (Eigen::Index a = 0; a < d; ++a)
                            out.segment(a * n, n).noalias() = scale * ((*owned)[a] * acc);
                        }};
}

Matrix omega_dense(const QuadraticModel& model) {
  const Eigen::Index n = model.width();
  const Eigen::Index d = model.datapoints();
  const double scale = model.zeta() * model.zeta() / static_cast<double>(d);
  Matrix omega(n * d, n * d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      omega.block(a * n, b * n, n, n) = scale * (model.meta_feature(a) * model.meta_feature(b));
  return omega;
}

BoundReport bound_multi_omega(const QuadraticModel& model, const Dataset& data,
                              const BoundOptions& options) {
  require(model.variant() == QuadraticVariant::pure, "bound_multi_omega: needs a pure model");
  BoundReport r;
  r.family = "pure_quadratic";
  r.method = BoundMethod::omega;
  const double theta2 = model.weight_norm();
  Rng rng(options.power_seed);
  const PowerIterationResult pi = power_iteration_lambda_max(omega_operator(model), rng, options.power);
  if (!pi.converged) r.flags.push_back("power_iteration_not_converged");
  r.lambda_max_h0 = top_eigenvalue(model.ntk(data));
  r.sufficient_upper = 4.0 / (pi.value * theta2);
  r.inputs = {{"zeta", model.zeta()},
              {"n", static_cast<double>(model.width())},
              {"D", static_cast<double>(model.datapoints())},
              {"theta0_sq", theta2},
              {"lambda_max_omega", pi.value},
              {"power_iterations", static_cast<double>(pi.iterations)},
              {"lambda_max_H0", r.lambda_max_h0}};
  finish(r);
  return r;
}

BoundReport bound_multi_psi_eff(const QuadraticModel& model, const Dataset& data) {
  require(model.variant() == QuadraticVariant::pure, "bound_multi_psi_eff: needs a pure model");
  BoundReport r;
  r.family = "pure_quadratic";
  r.method = BoundMethod::psi_eff;
  r.proven = false;
  r.flags.push_back("heuristic: assumes the top NTK eigenvector stays frozen");
  const Vector e = top_eigenvector(model.ntk(data), r);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.datapoints()));
  Matrix psi_eff = Matrix::Zero(model.width(), model.width());
  for (Eigen::Index a = 0; a < model.datapoints(); ++a) psi_eff += e(a) * model.meta_feature(a);
  psi_eff *= inv_sqrt_d;
  const SquaredSpectrum s = squared_spectrum(psi_eff);
  const double zeta2 = model.zeta() * model.zeta();
  const double theta2 = model.weight_norm();
  r.sufficient_upper = 4.0 / (zeta2 * theta2 * s.max);
  r.inputs = {{"zeta", model.zeta()},
              {"n", static_cast<double>(model.width())},
              {"D", static_cast<double>(model.datapoints())},
              {"theta0_sq", theta2},
              {"lambda_max_psi_eff_sq", s.max},
              {"lambda_max_H0", r.lambda_max_h0}};
  finish(r);
  return r;
}

BoundReport bound_multi_bias_eff(const QuadraticModel& model, const Dataset& data) {
  require(model.variant() == QuadraticVariant::with_bias,
          "bound_multi_bias_eff: needs a with-bias model");
  BoundReport r;
  r.family = "quadratic_with_bias";
  r.method = BoundMethod::bias_eff;
  r.proven = false;
  r.flags.push_back("heuristic: assumes the top NTK eigenvector stays frozen");
  const Vector e = top_eigenvector(model.ntk(data), r);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model.datapoints()));
  const Vector phi_eff = inv_sqrt_d * (model.features() * e);
  Matrix psi_eff = Matrix::Zero(model.width(), model.width());
  for (Eigen::Index a = 0; a < model.datapoints(); ++a) psi_eff += e(a) * model.meta_feature(a);
  psi_eff *= inv_sqrt_d;
  const SquaredSpectrum s = squared_spectrum(psi_eff);
  const double zeta2 = model.zeta() * model.zeta();
  const double theta2 = model.weight_norm();
  const double phi2 = phi_eff.squaredNorm();
  if (phi2 > 0.0) {
    const double phi_theta = phi_eff.dot(model.theta());
    const double combined = theta2 + phi_theta * phi_theta / phi2;
    r.sufficient_upper = 4.0 / (2.0 * phi2 + zeta2 * s.max * combined);
    r.inputs = {{"zeta", model.zeta()},
                {"n", static_cast<double>(model.width())},
                {"D", static_cast<double>(model.datapoints())},
                {"theta0_sq", theta2},
                {"phi_eff_sq", phi2},
                {"phi_eff_dot_theta0", phi_theta},
                {"lambda_max_psi_eff_sq", s.max},
                {"lambda_max_H0", r.lambda_max_h0}};
  } else {
    r.flags.push_back("phi_eff_zero: fell back to the pure psi_eff formula");
    r.sufficient_upper = 4.0 / (zeta2 * theta2 * s.max);
    r.inputs = {{"zeta", model.zeta()},
                {"n", static_cast<double>(model.width())},
                {"D", static_cast<double>(model.datapoints())},
                {"theta0_sq", theta2},
                {"phi_eff_sq", 0.0},
                {"lambda_max_psi_eff_sq", s.max},
                {"lambda_max_H0", r.lambda_max_h0}};
  }
  finish(r);
  return r;
}

BoundReport bound_mlp_multi(const HomogenousNet& net, const Dataset& data) {
  BoundReport r;
  r.family = "homogenous_mlp";
  r.method = BoundMethod::mlp_multi;
  const Activation& act = net.activation();
  if (act.a_minus <= 0.0) {
    r.proven = false;
    r.flags.push_back("relu_special_case: bound derived for a_minus > 0");
  }
  const double n = static_cast<double>(net.width());
  const double d_count = static_cast<double>(data.size());
  const double theta2 = net.weight_norm();
  const SymmetricMatrix sample_gram =
      SymmetricMatrix::symmetrized(data.inputs * data.inputs.transpose());
  const double lam_x = top_eigenvalue(sample_gram);
  require(lam_x > 0.0, "bound_mlp_multi: all inputs are zero");
  r.lambda_max_h0 = top_eigenvalue(net.ntk(data));
  r.sufficient_upper = 4.0 * n * d_count / (act.a_plus * act.a_plus * lam_x * theta2);
  r.inputs = {{"n", n},
              {"D", d_count},
              {"a_minus", act.a_minus},
              {"a_plus", act.a_plus},
              {"lambda_max_sample_gram", lam_x},
              {"theta0_sq", theta2},
              {"lambda_max_H0", r.lambda_max_h0}};
  finish(r);
  return r;
}

double homogenous_expected_margin(const Activation& activation) {
  return 2.0 * activation.a_minus * activation.a_minus;
}

}  // namespace catapult
