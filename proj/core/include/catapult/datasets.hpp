#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "catapult/dataset.hpp"
#include "catapult/models.hpp"

namespace catapult {

/// (x, y) = (1, 0).
Dataset make_toy();
/// (x, y) = (4, 2).
Dataset make_toy_relu();

/// x_alpha ~ U([-k, k]^d), y_alpha ~ U([-k, k]); inputs are drawn before labels.
Dataset make_random(Eigen::Index d, Eigen::Index count, double k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Feature and meta-feature functions
//   phi(x) = U x,  psi(x) = g(sum_i W^i x_i),  W^i = q_i^T diag(lambda^i) q_i,
//   q_i = exp(B_i) with B_i antisymmetric N(0,1).

enum class EigenScheme { paired_pm_1, paired_uniform };
enum class MetaActivation { identity, tanh };

const char* to_string(EigenScheme s);
const char* to_string(MetaActivation g);

struct MetaFeatureSpec {
  Eigen::Index n_psi = 0;  // meta-feature block (first n_psi coordinates)
  Eigen::Index n_phi = 0;  // feature block (last n_phi coordinates); 0 for a pure model
  Eigen::Index d = 1;
  EigenScheme scheme = EigenScheme::paired_uniform;
  double lo = 1.0;  // positive eigenvalues ~ U[lo, hi] for paired_uniform
  double hi = 2.0;
  MetaActivation g = MetaActivation::identity;
  std::uint64_t seed = 0;

  Eigen::Index n() const { return n_psi + n_phi; }
  void validate() const;
};

/// Paired eigenvalues (l_1, -l_1, l_2, -l_2, ...), plus a trailing 0 when the
/// order is odd, so that a left-to-right sum is exactly zero.
Vector paired_eigenvalues(Eigen::Index order, EigenScheme scheme, double lo, double hi, Rng& rng);

/// Fixed feature functions drawn once from a spec.
class QuadraticFeatureMap {
 public:
  /// Draws U (n_phi x d, N(0,1)) first, then for each input coordinate i the
  /// eigenvalues lambda^i followed by the generator B_i.
  explicit QuadraticFeatureMap(const MetaFeatureSpec& spec);

  Eigen::Index n() const { return n_psi() + n_phi(); }
  Eigen::Index n_psi() const { return w_.empty() ? 0 : w_.front().rows(); }
  Eigen::Index n_phi() const { return u_.rows(); }
  Eigen::Index d() const { return static_cast<Eigen::Index>(w_.size()); }
  const Matrix& u() const { return u_; }
  const std::vector<Matrix>& w() const { return w_; }
  const std::vector<Vector>& eigenvalues() const { return eigenvalues_; }
  MetaActivation activation() const { return g_; }

  /// phi(x) in R^n, zero on the meta-feature block.
  Vector phi(const Vector& x) const;
  /// psi(x), n x n, zero outside the meta-feature block; exactly symmetric.
  Matrix psi(const Vector& x) const;

 private:
  Matrix u_;
  std::vector<Matrix> w_;
  std::vector<Vector> eigenvalues_;
  MetaActivation g_ = MetaActivation::identity;
};

struct MetaFeatures {
  Matrix features;                  // n x D
  std::vector<Matrix> meta_features;  // D matrices n x n
};

/// Evaluates the map at each row of inputs.
MetaFeatures build_meta_features(const QuadraticFeatureMap& map, const Matrix& inputs);
MetaFeatures build_meta_features(const MetaFeatureSpec& spec, const Matrix& inputs);

/// Quadratic model over a feature map with N(0,1) weights drawn from rng.
/// Variant is pure when the map has no feature block, with_bias otherwise.
QuadraticModel make_quadratic_model(const QuadraticFeatureMap& map, const Dataset& data,
                                    double zeta, Rng& rng);

// ---------------------------------------------------------------------------
// Teacher-student

enum class ProjectorKind { orthogonal, truncation };

struct TeacherStudentSpec {
  Eigen::Index teacher_n_psi = 0;
  Eigen::Index teacher_n_phi = 0;
  Eigen::Index student_n_psi = 0;
  Eigen::Index student_n_phi = 0;
  Eigen::Index d = 1;
  Eigen::Index train_size = 32;
  Eigen::Index test_size = 1000;
  double input_half_width = 0.5;  // x ~ U([-w, w]^d)
  EigenScheme scheme = EigenScheme::paired_pm_1;
  double lo = 1.0;
  double hi = 2.0;
  MetaActivation g = MetaActivation::tanh;
  /// zeta on each side; 0 selects zeta^2 = 1/n_psi.
  double zeta_teacher = 0.0;
  double zeta_student = 0.0;
  ProjectorKind projector = ProjectorKind::orthogonal;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TeacherStudent {
  QuadraticFeatureMap teacher;
  Matrix q_psi;  // student_n_psi x teacher_n_psi, orthonormal rows
  Matrix q_phi;  // student_n_phi x teacher_n_phi, orthonormal rows
  Vector theta_teacher;
  double zeta_teacher = 0.0;
  double zeta_student = 0.0;
  Dataset data;  // teacher labels on train and test inputs

  Eigen::Index student_n() const { return q_psi.rows() + q_phi.rows(); }
  /// Q phi_teacher(x), blockwise.
  Vector student_phi(const Vector& x) const;
  /// Q psi_teacher(x) Q^T, blockwise; exactly symmetric.
  Matrix student_psi(const Vector& x) const;
  /// Student features at every row of inputs.
  MetaFeatures student_features(const Matrix& inputs) const;
  /// Student outputs at every row of inputs for weights theta, evaluated by
  /// lifting theta through Q^T so no student meta-feature is materialized.
  Vector student_outputs(const Matrix& inputs, const Vector& theta) const;
};

/// Draws teacher map, projector, teacher weights, then train and test inputs.
/// Student (meta-)features are phi_s = Q phi_t and psi_s = Q psi_t Q^T, with
/// Q acting blockwise so psi_s phi_s = 0 is preserved.
TeacherStudent make_teacher_student(const TeacherStudentSpec& spec);

/// Student model on the training inputs with N(0,1) weights drawn from rng.
QuadraticModel make_student_model(const TeacherStudent& ts, Rng& rng);

// ---------------------------------------------------------------------------
// Binary image datasets

/// Malformed image file; offset is the byte position of the problem.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& path, std::uint64_t offset, const std::string& what);
  const std::string& path() const { return path_; }
  std::uint64_t offset() const { return offset_; }

 private:
  std::string path_;
  std::uint64_t offset_;
};

enum class ImageFormat { idx, cifar_binary };

struct ImagePaths {
  // idx: one images file and one labels file per split.
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  // cifar_binary: record files per split.
  std::vector<std::string> train_batches;
  std::vector<std::string> test_batches;
};

/// Raw images as stored: one record of `dim` bytes per image.
struct LabeledImages {
  Eigen::Index dim = 0;
  std::vector<std::uint8_t> bytes;
  std::vector<int> labels;

  Eigen::Index count() const { return static_cast<Eigen::Index>(labels.size()); }
  /// Rows of the selected images with pixels scaled to [0, 1].
  Matrix rows(const std::vector<Eigen::Index>& which) const;
};

LabeledImages read_idx(const std::string& images_path, const std::string& labels_path);
LabeledImages read_cifar_binary(const std::string& path);

/// First train_size training images of the two classes in file order
/// (class_a -> -1, class_b -> +1) and every matching test image. A nonzero
/// shuffle_seed permutes the matching training images before truncation.
Dataset load_two_class_images(ImageFormat format, const ImagePaths& paths, int class_a,
                              int class_b, Eigen::Index train_size,
                              std::uint64_t shuffle_seed = 0);

}  // namespace catapult
