#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace catapult {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when an input violates a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Deterministic 64-bit generator.
///
/// The bit stream is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform doubles take the top 53 bits; normals use the
/// Box-Muller transform on two uniforms. Neither step relies on the
/// implementation-defined distribution classes of <random>, so a seed
/// reproduces the same samples on every conforming platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  double normal();

  Vector normal_vector(Eigen::Index count);
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Draws `count` independent standard normals.
Vector sample_normal(Rng& rng, Eigen::Index count);

/// Dense real matrix whose stored entries are exactly symmetric.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  /// Throws InvalidInput unless m(i,j) == m(j,i) bit for bit.
  explicit SymmetricMatrix(Matrix m);

  /// Averages m with its transpose; use for matrices that are symmetric only
  /// up to rounding.
  static SymmetricMatrix symmetrized(const Matrix& m);

  Eigen::Index order() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column k pairs with values(k)
};

/// Full eigendecomposition of a symmetric matrix, eigenvalues sorted in
/// descending order. Rejects non-finite entries.
EigenDecomposition sym_eigen(const SymmetricMatrix& m);

/// Matrix-free symmetric operator.
struct LinearOperator {
  Eigen::Index dimension = 0;
  std::function<void(const Vector& in, Vector& out)> apply;

  static LinearOperator from_matrix(const Matrix& m);
};

struct PowerIterationResult {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct PowerIterationOptions {
  double tol = 1e-6;
  int max_iters = 10000;
};

/// Largest eigenvalue of a symmetric positive semi-definite operator.
///
/// Iterates on a normal start vector drawn from `rng` and stops once the
/// Rayleigh quotient is within `tol` (relative) of its extrapolated limit or
/// the residual ||Av - rho v|| drops below tol * rho. A run that exhausts
/// max_iters returns the last Rayleigh quotient with converged == false.
PowerIterationResult power_iteration_lambda_max(const LinearOperator& op, Rng& rng,
                                                PowerIterationOptions options = {});

/// exp(B) for antisymmetric B by scaling and squaring a truncated Taylor
/// series. The result is orthogonal with determinant +1.
Matrix expm_antisymmetric(const Matrix& b);

/// Random antisymmetric matrix with independent N(0,1) upper-triangle entries.
Matrix random_antisymmetric(Rng& rng, Eigen::Index n);

}  // namespace catapult
