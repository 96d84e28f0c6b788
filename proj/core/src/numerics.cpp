#include "catapult/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace catapult {

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - uniform() lies in (0, 1], keeping the logarithm finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Vector Rng::normal_vector(Eigen::Index count) {
  Vector v(count);
  for (Eigen::Index i = 0; i < count; ++i) v(i) = normal();
  return v;
}

Matrix Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  // Row-major fill so the draw order does not depend on storage order.
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

Vector sample_normal(Rng& rng, Eigen::Index count) {
  if (count < 1) throw InvalidInput("sample_normal: count must be >= 1");
  return rng.normal_vector(count);
}

SymmetricMatrix::SymmetricMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw InvalidInput("SymmetricMatrix: matrix is not square");
  if (!m_.allFinite()) throw InvalidInput("SymmetricMatrix: non-finite entry");
  for (Eigen::Index j = 0; j < m_.cols(); ++j)
    for (Eigen::Index i = j + 1; i < m_.rows(); ++i)
      if (m_(i, j) != m_(j, i))
        throw InvalidInput("SymmetricMatrix: entries (" + std::to_string(i) + "," +
                           std::to_string(j) + ") and their transpose differ");
}

SymmetricMatrix SymmetricMatrix::symmetrized(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidInput("SymmetricMatrix: matrix is not square");
  Matrix s = 0.5 * (m + m.transpose());
  // (a+b)/2 and (b+a)/2 round identically, but enforce it anyway.
  for (Eigen::Index j = 0; j < s.cols(); ++j)
    for (Eigen::Index i = j + 1; i < s.rows(); ++i) s(j, i) = s(i, j);
  return SymmetricMatrix(std::move(s));
}

EigenDecomposition sym_eigen(const SymmetricMatrix& m) {
  if (!m.matrix().allFinite()) throw InvalidInput("sym_eigen: non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix());
  if (solver.info() != Eigen::Success) throw InvalidInput("sym_eigen: eigensolver failed");
  EigenDecomposition out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

LinearOperator LinearOperator::from_matrix(const Matrix& m) {
  return LinearOperator{m.rows(), [m](const Vector& in, Vector& out) { out.noalias() = m * in; }};
}

PowerIterationResult power_iteration_lambda_max(const LinearOperator& op, Rng& rng,
                                                PowerIterationOptions options) {
  if (op.dimension < 1) throw InvalidInput("power_iteration: empty operator");
  constexpr double kEps = std::numeric_limits<double>::epsilon();

  Vector v = rng.normal_vector(op.dimension);
  v.normalize();
  Vector w(op.dimension);

  PowerIterationResult result;
  double prev_rho = 0.0;
  double prev_delta = 0.0;
  for (int k = 1; k <= options.max_iters; ++k) {
    op.apply(v, w);
    const double rho = v.dot(w);
    result.value = rho;
    result.iterations = k;

    const double wnorm = w.norm();
    if (wnorm == 0.0) {
      result.value = 0.0;
      result.converged = true;
      return result;
    }
    const double residual = (w - rho * v).norm();
    if (residual <= options.tol * std::abs(rho)) {
      result.converged = true;
      return result;
    }

    if (k >= 3) {
      const double delta = rho - prev_rho;
      if (std::abs(delta) <= 8.0 * kEps * std::abs(rho)) {
        result.converged = true;
        return result;
      }
      // Geometric tail extrapolation of the Rayleigh-quotient increments.
      if (prev_delta > 0.0 && delta > 0.0) {
        const double ratio = delta / prev_delta;
        if (ratio < 1.0) {
          const double tail = delta * ratio / (1.0 - ratio);
          if (tail <= options.tol * std::abs(rho)) {
            result.value = rho + tail;
            result.converged = true;
            return result;
          }
        }
      }
      prev_delta = delta;
    } else if (k == 2) {
      prev_delta = rho - prev_rho;
    }
    prev_rho = rho;
    v = w / wnorm;
  }
  return result;
}

Matrix expm_antisymmetric(const Matrix& b) {
  if (b.rows() != b.cols()) throw InvalidInput("expm_antisymmetric: matrix is not square");
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = j; i < b.rows(); ++i)
      if (b(i, j) != -b(j, i))
        throw InvalidInput("expm_antisymmetric: input is not antisymmetric");
  const Eigen::Index n = b.rows();
  if (n == 0) return Matrix(0, 0);

  const double norm1 = b.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix a = b / std::ldexp(1.0, squarings);

  // ||a|| <= 1/2, so the degree-18 remainder is below 1e-21.
  constexpr int kDegree = 18;
  Matrix result = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= kDegree; ++k) {
    term = (term * a) / static_cast<double>(k);
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = (result * result).eval();
  return result;
}

Matrix random_antisymmetric(Rng& rng, Eigen::Index n) {
  Matrix b = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      b(i, j) = rng.normal();
      b(j, i) = -b(i, j);
    }
  return b;
}

}  // namespace catapult
