#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "catapult/dataset.hpp"
#include "catapult/numerics.hpp"

namespace catapult {

/// A model trained by full-batch gradient descent. Parameters are exposed as
/// one flat vector; each family documents its layout.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::unique_ptr<Model> clone() const = 0;

  /// z_alpha for every training datapoint.
  virtual Vector outputs(const Dataset& data) const = 0;
  /// (1/D) sum_alpha errors_alpha * dz_alpha/dtheta.
  virtual Vector gradient(const Dataset& data, const Vector& errors) const = 0;

  struct Evaluation {
    Vector outputs;
    Vector gradient;  // of the MSE loss at the current parameters
  };
  /// Outputs and MSE gradient in one pass; families override to share work.
  virtual Evaluation evaluate(const Dataset& data) const;

  virtual SymmetricMatrix ntk(const Dataset& data) const = 0;

  virtual Vector parameters() const = 0;
  virtual void set_parameters(const Vector& theta) = 0;
  virtual Eigen::Index parameter_count() const = 0;

  /// theta^2 over all trainable parameters.
  virtual double weight_norm() const { return parameters().squaredNorm(); }
  /// theta_+^2 for 1d ReLU nets with a frozen projector; empty otherwise.
  virtual std::optional<double> reduced_weight_norm() const { return std::nullopt; }
};

// ---------------------------------------------------------------------------
// Quadratic model  z_alpha = phi_alpha^T theta + (zeta/2) theta^T psi_alpha theta

enum class QuadraticVariant { pure, with_bias, generic };

const char* to_string(QuadraticVariant v);

class QuadraticModel final : public Model {
 public:
  /// features: n x D, column alpha is phi_alpha. meta_features: D matrices of
  /// order n, each exactly symmetric.
  ///
  /// Throws InvalidInput if shapes disagree, zeta < 0, a pure model has a
  /// nonzero feature, or a with-bias model violates psi_alpha phi_beta = 0.
  QuadraticModel(Vector theta, Matrix features, std::vector<Matrix> meta_features, double zeta,
                 QuadraticVariant variant);

  /// Pure model (all features zero).
  static QuadraticModel pure(Vector theta, std::vector<Matrix> meta_features, double zeta);

  /// Two-layer linear net with output bias, z = n^{-1/2} v.u + b, written as a
  /// with-bias quadratic model over theta = (u, v, b): phi_b = 1,
  /// psi_{u_i v_j} = psi_{v_j u_i} = delta_ij, zeta^2 = 1/n. One datapoint.
  static QuadraticModel linear_net_with_bias(const Vector& u, const Vector& v, double b);

  std::unique_ptr<Model> clone() const override { return std::make_unique<QuadraticModel>(*this); }

  Eigen::Index width() const { return theta_.size(); }
  Eigen::Index datapoints() const { return features_.cols(); }
  double zeta() const { return zeta_; }
  QuadraticVariant variant() const { return variant_; }
  const Vector& theta() const { return theta_; }
  const Matrix& features() const { return features_; }
  const Matrix& meta_feature(Eigen::Index alpha) const { return meta_features_[alpha]; }
  const std::vector<Matrix>& meta_features() const { return meta_features_; }

  /// z for datapoint alpha.
  double forward(Eigen::Index alpha) const;
  /// z for every datapoint.
  Vector forward_all() const;
  /// z for an arbitrary (phi, psi) pair sharing this model's weights.
  double forward_with(const Vector& phi, const Matrix& psi) const;
  /// n x D matrix whose columns are phi_alpha + zeta psi_alpha theta.
  Matrix effective_features() const;

  Vector outputs(const Dataset& data) const override;
  Vector gradient(const Dataset& data, const Vector& errors) const override;
  Evaluation evaluate(const Dataset& data) const override;
  SymmetricMatrix ntk(const Dataset& data) const override;
  Vector parameters() const override { return theta_; }
  void set_parameters(const Vector& theta) override;
  Eigen::Index parameter_count() const override { return theta_.size(); }
  double weight_norm() const override { return theta_.squaredNorm(); }

 private:
  void check_dataset(const Dataset& data) const;

  Vector theta_;
  Matrix features_;
  std::vector<Matrix> meta_features_;
  double zeta_;
  QuadraticVariant variant_;
};

double quad_forward(const QuadraticModel& model, Eigen::Index alpha);
SymmetricMatrix quad_ntk(const QuadraticModel& model, const Dataset& data);
Vector quad_grad(const QuadraticModel& model, const Dataset& data, const Vector& errors);

// ---------------------------------------------------------------------------
// Scale-invariant activations and the two-layer homogenous net

/// sigma(s) = a_plus s for s >= 0 and a_minus s for s < 0.
struct Activation {
  double a_minus = 0.0;
  double a_plus = 1.0;
  /// sigma'(0); (a_plus + a_minus)/2 unless deliberately overridden.
  double slope_at_zero = 0.5;

  /// Throws InvalidInput unless 0 <= a_minus <= a_plus.
  static Activation scale_invariant(double a_minus, double a_plus);
  static Activation relu() { return scale_invariant(0.0, 1.0); }

  double value(double s) const { return s >= 0.0 ? a_plus * s : a_minus * s; }
  double slope(double s) const {
    return s > 0.0 ? a_plus : (s < 0.0 ? a_minus : slope_at_zero);
  }
  bool is_relu() const { return a_minus == 0.0; }
};

/// Frozen sign split of the first-layer weights of a 1d ReLU net.
struct ReluProjectorDecomposition {
  Vector u_plus;   // sigma_ReLU(u)
  Vector u_minus;  // -sigma_ReLU(-u)
  Vector p_plus;   // diagonal of P+, entries 0/1 with u == 0 in P+
  Vector p_minus;  // diagonal of P-
};

/// z = n^{-1/2} v^T sigma(U x). Parameter layout: U (column-major), then v.
class HomogenousNet final : public Model {
 public:
  HomogenousNet(Matrix u, Vector v, Activation activation);

  /// U and v with independent N(0,1) entries (U row-major first, then v).
  static HomogenousNet initialize(Eigen::Index n, Eigen::Index d, Activation activation, Rng& rng);

  std::unique_ptr<Model> clone() const override { return std::make_unique<HomogenousNet>(*this); }

  Eigen::Index width() const { return u_.rows(); }
  Eigen::Index input_dim() const { return u_.cols(); }
  const Matrix& u() const { return u_; }
  const Vector& v() const { return v_; }
  const Activation& activation() const { return activation_; }
  void set_activation(Activation a) { activation_ = a; }

  double forward(const Vector& x) const;

  Vector outputs(const Dataset& data) const override;
  Vector gradient(const Dataset& data, const Vector& errors) const override;
  Evaluation evaluate(const Dataset& data) const override;
  SymmetricMatrix ntk(const Dataset& data) const override;
  Vector parameters() const override;
  void set_parameters(const Vector& theta) override;
  Eigen::Index parameter_count() const override { return u_.size() + v_.size(); }
  double weight_norm() const override { return u_.squaredNorm() + v_.squaredNorm(); }

  /// Freezes the P+/P- split at the current weights (d must be 1). Afterwards
  /// reduced_weight_norm() reports |P+ u|^2 + |P+ v|^2.
  void freeze_projector();
  const std::optional<ReluProjectorDecomposition>& projector() const { return projector_; }
  std::optional<double> reduced_weight_norm() const override;

 private:
  void check_dataset(const Dataset& data) const;

  Matrix u_;
  Vector v_;
  Activation activation_;
  std::optional<ReluProjectorDecomposition> projector_;
};

double mlp_forward(const HomogenousNet& net, const Vector& x);
SymmetricMatrix mlp_ntk(const HomogenousNet& net, const Dataset& data);

/// Throws InvalidInput unless the net has d == 1.
ReluProjectorDecomposition relu_project(const HomogenousNet& net);

// ---------------------------------------------------------------------------
// Bias-free ReLU MLP with k hidden n x n layers

/// z = n^{-(k+1)/2} v^T sigma(W_k ... sigma(W_1 sigma(U x))). k in {0, 1}.
/// Parameter layout: U, W_1..W_k (column-major), then v.
class DeepReluNet final : public Model {
 public:
  DeepReluNet(Matrix u, std::vector<Matrix> hidden, Vector v);

  static DeepReluNet initialize(Eigen::Index n, Eigen::Index d, int depth, Rng& rng);

  std::unique_ptr<Model> clone() const override { return std::make_unique<DeepReluNet>(*this); }

  Eigen::Index width() const { return u_.rows(); }
  Eigen::Index input_dim() const { return u_.cols(); }
  int depth() const { return static_cast<int>(hidden_.size()); }
  const Matrix& u() const { return u_; }
  const std::vector<Matrix>& hidden() const { return hidden_; }
  const Vector& v() const { return v_; }

  /// Post-activation maps, one n x D matrix per ReLU layer.
  std::vector<Matrix> activations(const Matrix& inputs) const;

  Vector outputs(const Dataset& data) const override;
  Vector gradient(const Dataset& data, const Vector& errors) const override;
  Evaluation evaluate(const Dataset& data) const override;
  SymmetricMatrix ntk(const Dataset& data) const override;
  Vector parameters() const override;
  void set_parameters(const Vector& theta) override;
  Eigen::Index parameter_count() const override;
  double weight_norm() const override;

  Vector forward_inputs(const Matrix& inputs) const;

 private:
  struct Pass;
  Pass run(const Matrix& inputs, bool backward) const;
  double output_scale() const;

  Matrix u_;
  std::vector<Matrix> hidden_;
  Vector v_;
};

Vector deep_relu_forward(const DeepReluNet& net, const Dataset& data);
SymmetricMatrix deep_relu_ntk(const DeepReluNet& net, const Dataset& data);

/// Sum of squares of every trainable parameter.
double weight_norm(const Model& model);

}  // namespace catapult
