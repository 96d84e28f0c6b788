#include "catapult/models.hpp"

#include <cmath>
#include <string>

namespace catapult {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

bool exactly_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = j + 1; i < m.rows(); ++i)
      if (m(i, j) != m(j, i)) return false;
  return true;
}

// Applies f entrywise; keeps a copy of s for the derivative pass.
template <typename F>
Matrix map_entries(const Matrix& s, F f) {
  Matrix out(s.rows(), s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j)
    for (Eigen::Index i = 0; i < s.rows(); ++i) out(i, j) = f(s(i, j));
  return out;
}

SymmetricMatrix gram(const Matrix& cols, double scale) {
  Matrix g = scale * (cols.transpose() * cols);
  return SymmetricMatrix::symmetrized(g);
}

}  // namespace

Model::Evaluation Model::evaluate(const Dataset& data) const {
  Evaluation e;
  e.outputs = outputs(data);
  e.gradient = gradient(data, e.outputs - data.labels);
  return e;
}

double weight_norm(const Model& model) { return model.weight_norm(); }

// ---------------------------------------------------------------------------

const char* to_string(QuadraticVariant v) {
  switch (v) {
    case QuadraticVariant::pure: return "pure";
    case QuadraticVariant::with_bias: return "with_bias";
    case QuadraticVariant::generic: return "generic";
  }
  return "?";
}

QuadraticModel::QuadraticModel(Vector theta, Matrix features, std::vector<Matrix> meta_features,
                               double zeta, QuadraticVariant variant)
    : theta_(std::move(theta)),
      features_(std::move(features)),
      meta_features_(std::move(meta_features)),
      zeta_(zeta),
      variant_(variant) {
  const Eigen::Index n = theta_.size();
  require(n >= 1, "QuadraticModel: empty weight vector");
  require(std::isfinite(zeta_) && zeta_ >= 0.0, "QuadraticModel: zeta must be finite and >= 0");
  require(features_.rows() == n, "QuadraticModel: features must have n rows");
  require(static_cast<Eigen::Index>(meta_features_.size()) == features_.cols(),
          "QuadraticModel: need one meta-feature matrix per datapoint");
  require(features_.cols() >= 1, "QuadraticModel: no datapoints");
  for (std::size_t a = 0; a < meta_features_.size(); ++a) {
    const Matrix& psi = meta_features_[a];
    require(psi.rows() == n && psi.cols() == n,
            "QuadraticModel: meta_features[" + std::to_string(a) + "] must be n x n");
    require(exactly_symmetric(psi),
            "QuadraticModel: meta_features[" + std::to_string(a) + "] is not symmetric");
  }
  if (variant_ == QuadraticVariant::pure)
    require((features_.array() == 0.0).all(), "QuadraticModel: pure variant has nonzero features");
  if (variant_ == QuadraticVariant::with_bias) {
    for (std::size_t a = 0; a < meta_features_.size(); ++a) {
      const Matrix prod = meta_features_[a] * features_;
      const double scale = std::max(1.0, meta_features_[a].cwiseAbs().maxCoeff() *
                                              features_.cwiseAbs().colwise().sum().maxCoeff());
      require(prod.cwiseAbs().maxCoeff() <= 1e-10 * scale,
              "QuadraticModel: with_bias variant violates psi phi = 0 at datapoint " +
                  std::to_string(a));
    }
  }
}

QuadraticModel QuadraticModel::pure(Vector theta, std::vector<Matrix> meta_features, double zeta) {
  const Eigen::Index n = theta.size();
  const auto d = static_cast<Eigen::Index>(meta_features.size());
  return QuadraticModel(std::move(theta), Matrix::Zero(n, d), std::move(meta_features), zeta,
                        QuadraticVariant::pure);
}

QuadraticModel QuadraticModel::linear_net_with_bias(const Vector& u, const Vector& v, double b) {
  require(u.size() == v.size() && u.size() >= 1, "linear_net_with_bias: u and v need equal size");
  const Eigen::Index n = u.size();
  const Eigen::Index p = 2 * n + 1;
  Vector theta(p);
  theta << u, v, b;
  Matrix phi = Matrix::Zero(p, 1);
  phi(2 * n, 0) = 1.0;
  Matrix psi = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    psi(i, n + i) = 1.0;
    psi(n + i, i) = 1.0;
  }
  return QuadraticModel(std::move(theta), std::move(phi), {std::move(psi)},
                        1.0 / std::sqrt(static_cast<double>(n)), QuadraticVariant::with_bias);
}

double QuadraticModel::forward(Eigen::Index alpha) const {
  require(alpha >= 0 && alpha < datapoints(), "QuadraticModel::forward: index out of range");
  return features_.col(alpha).dot(theta_) +
         0.5 * zeta_ * theta_.dot(meta_features_[alpha] * theta_);
}

Vector QuadraticModel::forward_all() const {
  Vector z(datapoints());
  for (Eigen::Index a = 0; a < datapoints(); ++a) z(a) = forward(a);
  return z;
}

double QuadraticModel::forward_with(const Vector& phi, const Matrix& psi) const {
  require(phi.size() == width() && psi.rows() == width() && psi.cols() == width(),
          "QuadraticModel::forward_with: shape mismatch");
  return phi.dot(theta_) + 0.5 * zeta_ * theta_.dot(psi * theta_);
}

Matrix QuadraticModel::effective_features() const {
  Matrix e = features_;
  if (zeta_ != 0.0)
    for (Eigen::Index a = 0; a < datapoints(); ++a)
      e.col(a).noalias() += zeta_ * (meta_features_[a] * theta_);
  return e;
}

void QuadraticModel::check_dataset(const Dataset& data) const {
  require(data.size() == datapoints(),
          "QuadraticModel: dataset size " + std::to_string(data.size()) +
              " does not match the model's " + std::to_string(datapoints()) + " datapoints");
}

Vector QuadraticModel::outputs(const Dataset& data) const {
  check_dataset(data);
  return forward_all();
}

Vector QuadraticModel::gradient(const Dataset& data, const Vector& errors) const {
  check_dataset(data);
  require(errors.size() == datapoints(), "QuadraticModel::gradient: error vector size mismatch");
  return effective_features() * errors / static_cast<double>(datapoints());
}

Model::Evaluation QuadraticModel::evaluate(const Dataset& data) const {
  check_dataset(data);
  const double inv_d = 1.0 / static_cast<double>(datapoints());
  Evaluation e;
  e.outputs.resize(datapoints());
  Matrix eff = features_;
  for (Eigen::Index a = 0; a < datapoints(); ++a) {
    const Vector psi_theta = meta_features_[a] * theta_;
    e.outputs(a) = features_.col(a).dot(theta_) + 0.5 * zeta_ * theta_.dot(psi_theta);
    if (zeta_ != 0.0) eff.col(a).noalias() += zeta_ * psi_theta;
  }
  e.gradient = eff * (e.outputs - data.labels) * inv_d;
  return e;
}

SymmetricMatrix QuadraticModel::ntk(const Dataset& data) const {
  check_dataset(data);
  return gram(effective_features(), 1.0 / static_cast<double>(datapoints()));
}

void QuadraticModel::set_parameters(const Vector& theta) {
  require(theta.size() == theta_.size(), "QuadraticModel::set_parameters: size mismatch");
  theta_ = theta;
}

double quad_forward(const QuadraticModel& model, Eigen::Index alpha) { return model.forward(alpha); }

SymmetricMatrix quad_ntk(const QuadraticModel& model, const Dataset& data) { return model.ntk(data); }

Vector quad_grad(const QuadraticModel& model, const Dataset& data, const Vector& errors) {
  return model.gradient(data, errors);
}

// ---------------------------------------------------------------------------

Activation Activation::scale_invariant(double a_minus, double a_plus) {
  require(std::isfinite(a_minus) && std::isfinite(a_plus) && 0.0 <= a_minus && a_minus <= a_plus,
          "Activation: need 0 <= a_minus <= a_plus");
  return Activation{a_minus, a_plus, 0.5 * (a_plus + a_minus)};
}

HomogenousNet::HomogenousNet(Matrix u, Vector v, Activation activation)
    : u_(std::move(u)), v_(std::move(v)), activation_(activation) {
  require(u_.rows() >= 1 && u_.cols() >= 1, "HomogenousNet: empty first layer");
  require(v_.size() == u_.rows(), "HomogenousNet: v must have n entries");
  require(0.0 <= activation_.a_minus && activation_.a_minus <= activation_.a_plus,
          "HomogenousNet: need 0 <= a_minus <= a_plus");
}

HomogenousNet HomogenousNet::initialize(Eigen::Index n, Eigen::Index d, Activation activation,
                                        Rng& rng) {
  require(n >= 1 && d >= 1, "HomogenousNet::initialize: n and d must be >= 1");
  Matrix u = rng.normal_matrix(n, d);
  Vector v = rng.normal_vector(n);
  return HomogenousNet(std::move(u), std::move(v), activation);
}

double HomogenousNet::forward(const Vector& x) const {
  require(x.size() == input_dim(), "HomogenousNet::forward: input dimension mismatch");
  const Vector s = u_ * x;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) acc += v_(i) * activation_.value(s(i));
  return acc / std::sqrt(static_cast<double>(width()));
}

void HomogenousNet::check_dataset(const Dataset& data) const {
  require(data.dim() == input_dim(), "HomogenousNet: dataset input dimension " +
                                         std::to_string(data.dim()) + " != " +
                                         std::to_string(input_dim()));
}

Vector HomogenousNet::outputs(const Dataset& data) const {
  check_dataset(data);
  const Matrix s = u_ * data.inputs.transpose();
  const Matrix a = map_entries(s, [&](double x) { return activation_.value(x); });
  return a.transpose() * v_ / std::sqrt(static_cast<double>(width()));
}

Vector HomogenousNet::gradient(const Dataset& data, const Vector& errors) const {
  check_dataset(data);
  require(errors.size() == data.size(), "HomogenousNet::gradient: error vector size mismatch");
  const double scale = 1.0 / (std::sqrt(static_cast<double>(width())) * data.size());
  const Matrix s = u_ * data.inputs.transpose();
  const Matrix a = map_entries(s, [&](double x) { return activation_.value(x); });
  Matrix g = map_entries(s, [&](double x) { return activation_.slope(x); });
  g = (g.array().colwise() * v_.array()).matrix();
  g = (g.array().rowwise() * errors.transpose().array()).matrix();

  Vector out(parameter_count());
  Eigen::Map<Matrix>(out.data(), width(), input_dim()).noalias() = scale * (g * data.inputs);
  out.tail(width()).noalias() = scale * (a * errors);
  return out;
}

Model::Evaluation HomogenousNet::evaluate(const Dataset& data) const {
  check_dataset(data);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(width()));
  const double scale = inv_sqrt_n / static_cast<double>(data.size());
  const Matrix s = u_ * data.inputs.transpose();
  const Matrix a = map_entries(s, [&](double x) { return activation_.value(x); });

  Evaluation e;
  e.outputs = a.transpose() * v_ * inv_sqrt_n;
  const Vector errors = e.outputs - data.labels;

  Matrix g = map_entries(s, [&](double x) { return activation_.slope(x); });
  g = (g.array().colwise() * v_.array()).matrix();
  g = (g.array().rowwise() * errors.transpose().array()).matrix();
  e.gradient.resize(parameter_count());
  Eigen::Map<Matrix>(e.gradient.data(), width(), input_dim()).noalias() =
      scale * (g * data.inputs);
  e.gradient.tail(width()).noalias() = scale * (a * errors);
  return e;
}

SymmetricMatrix HomogenousNet::ntk(const Dataset& data) const {
  check_dataset(data);
  const Matrix s = u_ * data.inputs.transpose();
  const Matrix a = map_entries(s, [&](double x) { return activation_.value(x); });
  Matrix g = map_entries(s, [&](double x) { return activation_.slope(x); });
  g = (g.array().colwise() * v_.array()).matrix();
  const Matrix xx = data.inputs * data.inputs.transpose();
  Matrix h = a.transpose() * a + (xx.array() * (g.transpose() * g).array()).matrix();
  h /= static_cast<double>(width()) * static_cast<double>(data.size());
  return SymmetricMatrix::symmetrized(h);
}

Vector HomogenousNet::parameters() const {
  Vector out(parameter_count());
  Eigen::Map<Matrix>(out.data(), width(), input_dim()) = u_;
  out.tail(width()) = v_;
  return out;
}

void HomogenousNet::set_parameters(const Vector& theta) {
  require(theta.size() == parameter_count(), "HomogenousNet::set_parameters: size mismatch");
  u_ = Eigen::Map<const Matrix>(theta.data(), width(), input_dim());
  v_ = theta.tail(width());
}

void HomogenousNet::freeze_projector() { projector_ = relu_project(*this); }

std::optional<double> HomogenousNet::reduced_weight_norm() const {
  if (!projector_) return std::nullopt;
  const Vector& p = projector_->p_plus;
  return (p.array() * u_.col(0).array()).matrix().squaredNorm() +
         (p.array() * v_.array()).matrix().squaredNorm();
}

double mlp_forward(const HomogenousNet& net, const Vector& x) { return net.forward(x); }

SymmetricMatrix mlp_ntk(const HomogenousNet& net, const Dataset& data) { return net.ntk(data); }

ReluProjectorDecomposition relu_project(const HomogenousNet& net) {
  require(net.input_dim() == 1, "relu_project: the projector analysis needs d == 1");
  const Vector u = net.u().col(0);
  ReluProjectorDecomposition r;
  r.u_plus = u.cwiseMax(0.0);
  r.u_minus = u.cwiseMin(0.0);
  r.p_plus = (u.array() >= 0.0).cast<double>();
  r.p_minus = (u.array() < 0.0).cast<double>();
  // Signed zeros: -0.0 lands in P+ and in u_plus as +0.0, keeping u_+ + u_- == u.
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u(i) == 0.0) {
      r.u_plus(i) = u(i);
      r.u_minus(i) = 0.0;
    }
  return r;
}

// ---------------------------------------------------------------------------

namespace {
const Activation kRelu = Activation::relu();
}

struct DeepReluNet::Pass {
  std::vector<Matrix> pre;   // per ReLU layer, n x D
  std::vector<Matrix> post;  // per ReLU layer, n x D
  Vector z;
  std::vector<Matrix> delta;  // dz/d(pre-activation) per layer, n x D
};

DeepReluNet::DeepReluNet(Matrix u, std::vector<Matrix> hidden, Vector v)
    : u_(std::move(u)), hidden_(std::move(hidden)), v_(std::move(v)) {
  require(hidden_.size() <= 1, "DeepReluNet: unsupported depth " + std::to_string(hidden_.size()) +
                                   " (supported: 0 or 1 hidden n x n layers)");
  require(u_.rows() >= 1 && u_.cols() >= 1, "DeepReluNet: empty first layer");
  require(v_.size() == u_.rows(), "DeepReluNet: v must have n entries");
  for (const Matrix& w : hidden_)
    require(w.rows() == width() && w.cols() == width(), "DeepReluNet: hidden layers must be n x n");
}

DeepReluNet DeepReluNet::initialize(Eigen::Index n, Eigen::Index d, int depth, Rng& rng) {
  require(depth == 0 || depth == 1,
          "DeepReluNet: unsupported depth " + std::to_string(depth) + " (supported: 0, 1)");
  require(n >= 1 && d >= 1, "DeepReluNet::initialize: n and d must be >= 1");
  Matrix u = rng.normal_matrix(n, d);
  std::vector<Matrix> hidden;
  for (int k = 0; k < depth; ++k) hidden.push_back(rng.normal_matrix(n, n));
  Vector v = rng.normal_vector(n);
  return DeepReluNet(std::move(u), std::move(hidden), std::move(v));
}

double DeepReluNet::output_scale() const {
  return std::pow(static_cast<double>(width()), -0.5 * (depth() + 1));
}

DeepReluNet::Pass DeepReluNet::run(const Matrix& inputs, bool backward) const {
  require(inputs.cols() == input_dim(), "DeepReluNet: input dimension mismatch");
  Pass p;
  p.pre.push_back(u_ * inputs.transpose());
  p.post.push_back(p.pre.back().cwiseMax(0.0));
  for (const Matrix& w : hidden_) {
    p.pre.push_back(w * p.post.back());
    p.post.push_back(p.pre.back().cwiseMax(0.0));
  }
  const double c = output_scale();
  p.z = c * (p.post.back().transpose() * v_);
  if (!backward) return p;

  const std::size_t layers = p.pre.size();
  p.delta.resize(layers);
  auto slope = [](double x) { return kRelu.slope(x); };
  Matrix d = map_entries(p.pre[layers - 1], slope);
  p.delta[layers - 1] = c * (d.array().colwise() * v_.array()).matrix();
  for (std::size_t l = layers - 1; l > 0; --l) {
    const Matrix back = hidden_[l - 1].transpose() * p.delta[l];
    p.delta[l - 1] = (map_entries(p.pre[l - 1], slope).array() * back.array()).matrix();
  }
  return p;
}

std::vector<Matrix> DeepReluNet::activations(const Matrix& inputs) const {
  return run(inputs, false).post;
}

Vector DeepReluNet::forward_inputs(const Matrix& inputs) const { return run(inputs, false).z; }

Vector DeepReluNet::outputs(const Dataset& data) const { return forward_inputs(data.inputs); }

namespace {

// Writes (1/D) sum_alpha e_alpha dz_alpha/dtheta for a completed pass.
template <typename PassT>
void accumulate_gradient(const PassT& p, const Matrix& inputs, const Vector& errors, double c,
                         Eigen::Index n, Eigen::Index d, Vector& out) {
  const double inv_d = 1.0 / static_cast<double>(inputs.rows());
  Eigen::Index offset = 0;
  {
    const Matrix weighted = (p.delta[0].array().rowwise() * errors.transpose().array()).matrix();
    Eigen::Map<Matrix>(out.data(), n, d).noalias() = inv_d * (weighted * inputs);
    offset += n * d;
  }
  for (std::size_t l = 1; l < p.delta.size(); ++l) {
    const Matrix weighted = (p.delta[l].array().rowwise() * errors.transpose().array()).matrix();
    Eigen::Map<Matrix>(out.data() + offset, n, n).noalias() =
        inv_d * (weighted * p.post[l - 1].transpose());
    offset += n * n;
  }
  out.segment(offset, n).noalias() = (c * inv_d) * (p.post.back() * errors);
}

}  // namespace

Vector DeepReluNet::gradient(const Dataset& data, const Vector& errors) const {
  require(errors.size() == data.size(), "DeepReluNet::gradient: error vector size mismatch");
  const Pass p = run(data.inputs, true);
  Vector out(parameter_count());
  accumulate_gradient(p, data.inputs, errors, output_scale(), width(), input_dim(), out);
  return out;
}

Model::Evaluation DeepReluNet::evaluate(const Dataset& data) const {
  const Pass p = run(data.inputs, true);
  Evaluation e;
  e.outputs = p.z;
  const Vector errors = p.z - data.labels;
  e.gradient.resize(parameter_count());
  accumulate_gradient(p, data.inputs, errors, output_scale(), width(), input_dim(), e.gradient);
  return e;
}

SymmetricMatrix DeepReluNet::ntk(const Dataset& data) const {
  // Sum over layers of (delta^T delta) o (input^T input); the Jacobian is
  // never formed.
  const Pass p = run(data.inputs, true);
  const double c = output_scale();
  Matrix h = (c * c) * (p.post.back().transpose() * p.post.back());
  const Matrix xx = data.inputs * data.inputs.transpose();
  h += ((p.delta[0].transpose() * p.delta[0]).array() * xx.array()).matrix();
  for (std::size_t l = 1; l < p.delta.size(); ++l)
    h += ((p.delta[l].transpose() * p.delta[l]).array() *
          (p.post[l - 1].transpose() * p.post[l - 1]).array())
             .matrix();
  h /= static_cast<double>(data.size());
  return SymmetricMatrix::symmetrized(h);
}

Vector DeepReluNet::parameters() const {
  Vector out(parameter_count());
  Eigen::Index offset = 0;
  Eigen::Map<Matrix>(out.data(), width(), input_dim()) = u_;
  offset += u_.size();
  for (const Matrix& w : hidden_) {
    Eigen::Map<Matrix>(out.data() + offset, width(), width()) = w;
    offset += w.size();
  }
  out.segment(offset, width()) = v_;
  return out;
}

void DeepReluNet::set_parameters(const Vector& theta) {
  require(theta.size() == parameter_count(), "DeepReluNet::set_parameters: size mismatch");
  Eigen::Index offset = 0;
  u_ = Eigen::Map<const Matrix>(theta.data(), width(), input_dim());
  offset += u_.size();
  for (Matrix& w : hidden_) {
    w = Eigen::Map<const Matrix>(theta.data() + offset, width(), width());
    offset += w.size();
  }
  v_ = theta.segment(offset, width());
}

Eigen::Index DeepReluNet::parameter_count() const {
  Eigen::Index count = u_.size() + v_.size();
  for (const Matrix& w : hidden_) count += w.size();
  return count;
}

double DeepReluNet::weight_norm() const {
  double acc = u_.squaredNorm() + v_.squaredNorm();
  for (const Matrix& w : hidden_) acc += w.squaredNorm();
  return acc;
}

Vector deep_relu_forward(const DeepReluNet& net, const Dataset& data) { return net.outputs(data); }

SymmetricMatrix deep_relu_ntk(const DeepReluNet& net, const Dataset& data) { return net.ntk(data); }

}  // namespace catapult
