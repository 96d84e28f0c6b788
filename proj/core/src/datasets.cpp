#include "catapult/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace catapult {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::toy: return "toy";
    case Provenance::random: return "random";
    case Provenance::teacher_student: return "teacher_student";
    case Provenance::image_two_class: return "image_two_class";
  }
  return "?";
}

void Dataset::validate() const {
  require(inputs.rows() >= 1, "dataset: need at least one datapoint");
  require(labels.size() == inputs.rows(), "dataset: labels and inputs disagree in count");
  require(labels.allFinite(), "dataset: labels must be finite");
  require(test_inputs.has_value() == test_labels.has_value(),
          "dataset: test inputs and labels must come together");
  if (test_inputs) {
    require(test_inputs->cols() == inputs.cols(), "dataset: test inputs have the wrong dimension");
    require(test_labels->size() == test_inputs->rows(), "dataset: test labels and inputs disagree");
  }
}

Dataset make_toy() {
  Dataset d;
  d.inputs = Matrix::Constant(1, 1, 1.0);
  d.labels = Vector::Zero(1);
  d.provenance = Provenance::toy;
  return d;
}

Dataset make_toy_relu() {
  Dataset d;
  d.inputs = Matrix::Constant(1, 1, 4.0);
  d.labels = Vector::Constant(1, 2.0);
  d.provenance = Provenance::toy;
  return d;
}

Dataset make_random(Eigen::Index d, Eigen::Index count, double k, std::uint64_t seed) {
  require(k > 0.0, "make_random: k must be > 0");
  require(d >= 1 && count >= 1, "make_random: d and D must be >= 1");
  Rng rng(seed);
  Dataset out;
  out.inputs.resize(count, d);
  for (Eigen::Index a = 0; a < count; ++a)
    for (Eigen::Index i = 0; i < d; ++i) out.inputs(a, i) = rng.uniform(-k, k);
  out.labels.resize(count);
  for (Eigen::Index a = 0; a < count; ++a) out.labels(a) = rng.uniform(-k, k);
  out.provenance = Provenance::random;
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(EigenScheme s) {
  return s == EigenScheme::paired_pm_1 ? "paired_pm_1" : "paired_uniform";
}

const char* to_string(MetaActivation g) { return g == MetaActivation::tanh ? "tanh" : "identity"; }

void MetaFeatureSpec::validate() const {
  require(n_psi >= 1, "meta_features.n_psi must be >= 1");
  require(n_phi >= 0, "meta_features.n_phi must be >= 0");
  require(d >= 1, "meta_features.d must be >= 1");
  if (scheme == EigenScheme::paired_uniform)
    require(std::isfinite(lo) && std::isfinite(hi) && 0.0 <= lo && lo <= hi,
            "meta_features: need 0 <= lo <= hi");
}

Vector paired_eigenvalues(Eigen::Index order, EigenScheme scheme, double lo, double hi, Rng& rng) {
  Vector lam = Vector::Zero(order);
  for (Eigen::Index j = 0; j + 1 < order; j += 2) {
    const double l = scheme == EigenScheme::paired_pm_1 ? 1.0 : rng.uniform(lo, hi);
    lam(j) = l;
    lam(j + 1) = -l;
  }
  return lam;
}

QuadraticFeatureMap::QuadraticFeatureMap(const MetaFeatureSpec& spec) : g_(spec.g) {
  spec.validate();
  Rng rng(spec.seed);
  u_ = rng.normal_matrix(spec.n_phi, spec.d);
  for (Eigen::Index i = 0; i < spec.d; ++i) {
    Vector lam = paired_eigenvalues(spec.n_psi, spec.scheme, spec.lo, spec.hi, rng);
    const Matrix q = expm_antisymmetric(random_antisymmetric(rng, spec.n_psi));
    // W_{mu nu} = sum_sigma lambda_sigma q_{sigma mu} q_{sigma nu}
    const Matrix w = q.transpose() * lam.asDiagonal() * q;
    w_.push_back(SymmetricMatrix::symmetrized(w).matrix());
    eigenvalues_.push_back(std::move(lam));
  }
}

Vector QuadraticFeatureMap::phi(const Vector& x) const {
  require(x.size() == d(), "QuadraticFeatureMap::phi: input dimension mismatch");
  Vector out = Vector::Zero(n());
  if (n_phi() > 0) out.tail(n_phi()) = u_ * x;
  return out;
}

Matrix QuadraticFeatureMap::psi(const Vector& x) const {
  require(x.size() == d(), "QuadraticFeatureMap::psi: input dimension mismatch");
  const Eigen::Index m = n_psi();
  Matrix block = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < d(); ++i) block += x(i) * w_[i];
  if (g_ == MetaActivation::tanh) block = block.array().tanh().matrix();
  if (n_phi() == 0) return block;
  Matrix out = Matrix::Zero(n(), n());
  out.topLeftCorner(m, m) = block;
  return out;
}

MetaFeatures build_meta_features(const QuadraticFeatureMap& map, const Matrix& inputs) {
  require(inputs.cols() == map.d(), "build_meta_features: input dimension mismatch");
  MetaFeatures mf;
  mf.features.resize(map.n(), inputs.rows());
  for (Eigen::Index a = 0; a < inputs.rows(); ++a) {
    const Vector x = inputs.row(a).transpose();
    mf.features.col(a) = map.phi(x);
    mf.meta_features.push_back(map.psi(x));
  }
  return mf;
}

MetaFeatures build_meta_features(const MetaFeatureSpec& spec, const Matrix& inputs) {
  return build_meta_features(QuadraticFeatureMap(spec), inputs);
}

QuadraticModel make_quadratic_model(const QuadraticFeatureMap& map, const Dataset& data,
                                    double zeta, Rng& rng) {
  MetaFeatures mf = build_meta_features(map, data.inputs);
  Vector theta = rng.normal_vector(map.n());
  const QuadraticVariant variant =
      map.n_phi() == 0 ? QuadraticVariant::pure : QuadraticVariant::with_bias;
  return QuadraticModel(std::move(theta), std::move(mf.features), std::move(mf.meta_features), zeta,
                        variant);
}

// ---------------------------------------------------------------------------

void TeacherStudentSpec::validate() const {
  require(teacher_n_psi >= 1, "teacher_student.teacher_n_psi must be >= 1");
  require(student_n_psi >= 1 && student_n_psi <= teacher_n_psi,
          "teacher_student: need 1 <= student_n_psi <= teacher_n_psi");
  require(student_n_phi >= 0 && student_n_phi <= teacher_n_phi,
          "teacher_student: need 0 <= student_n_phi <= teacher_n_phi");
  require((student_n_phi == 0) == (teacher_n_phi == 0),
          "teacher_student: teacher and student must both have or both lack features");
  require(d >= 1 && train_size >= 1 && test_size >= 0, "teacher_student: bad sizes");
  require(input_half_width > 0.0, "teacher_student.input_half_width must be > 0");
  require(zeta_teacher >= 0.0 && zeta_student >= 0.0, "teacher_student: zeta must be >= 0");
}

namespace {

Matrix make_projector(Eigen::Index rows, Eigen::Index cols, ProjectorKind kind, Rng& rng) {
  if (rows == 0) return Matrix(0, cols);
  if (kind == ProjectorKind::truncation) return Matrix::Identity(rows, cols);
  return expm_antisymmetric(random_antisymmetric(rng, cols)).topRows(rows);
}

Matrix uniform_inputs(Eigen::Index count, Eigen::Index d, double w, Rng& rng) {
  Matrix x(count, d);
  for (Eigen::Index a = 0; a < count; ++a)
    for (Eigen::Index i = 0; i < d; ++i) x(a, i) = rng.uniform(-w, w);
  return x;
}

double teacher_output(const QuadraticFeatureMap& map, const Vector& x, const Vector& theta,
                      double zeta) {
  const Eigen::Index m = map.n_psi();
  const Matrix psi = map.psi(x);
  const auto theta_psi = theta.head(m);
  double z = 0.5 * zeta * theta_psi.dot(psi.topLeftCorner(m, m) * theta_psi);
  if (map.n_phi() > 0) z += theta.tail(map.n_phi()).dot(map.u() * x);
  return z;
}

}  // namespace

TeacherStudent make_teacher_student(const TeacherStudentSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  MetaFeatureSpec mspec;
  mspec.n_psi = spec.teacher_n_psi;
  mspec.n_phi = spec.teacher_n_phi;
  mspec.d = spec.d;
  mspec.scheme = spec.scheme;
  mspec.lo = spec.lo;
  mspec.hi = spec.hi;
  mspec.g = spec.g;
  mspec.seed = rng.next_u64();

  TeacherStudent ts{QuadraticFeatureMap(mspec), {}, {}, {}, 0.0, 0.0, {}};
  ts.q_psi = make_projector(spec.student_n_psi, spec.teacher_n_psi, spec.projector, rng);
  ts.q_phi = make_projector(spec.student_n_phi, spec.teacher_n_phi, spec.projector, rng);
  ts.zeta_teacher = spec.zeta_teacher > 0.0
                        ? spec.zeta_teacher
                        : 1.0 / std::sqrt(static_cast<double>(spec.teacher_n_psi));
  ts.zeta_student = spec.zeta_student > 0.0
                        ? spec.zeta_student
                        : 1.0 / std::sqrt(static_cast<double>(spec.student_n_psi));
  ts.theta_teacher = rng.normal_vector(ts.teacher.n());

  auto label = [&](const Matrix& x) {
    Vector y(x.rows());
    for (Eigen::Index a = 0; a < x.rows(); ++a)
      y(a) = teacher_output(ts.teacher, x.row(a).transpose(), ts.theta_teacher, ts.zeta_teacher);
    return y;
  };
  ts.data.inputs = uniform_inputs(spec.train_size, spec.d, spec.input_half_width, rng);
  ts.data.labels = label(ts.data.inputs);
  if (spec.test_size > 0) {
    ts.data.test_inputs = uniform_inputs(spec.test_size, spec.d, spec.input_half_width, rng);
    ts.data.test_labels = label(*ts.data.test_inputs);
  }
  ts.data.provenance = Provenance::teacher_student;
  return ts;
}

Vector TeacherStudent::student_phi(const Vector& x) const {
  Vector out = Vector::Zero(student_n());
  if (q_phi.rows() > 0) out.tail(q_phi.rows()) = q_phi * (teacher.u() * x);
  return out;
}

Matrix TeacherStudent::student_psi(const Vector& x) const {
  const Eigen::Index mt = teacher.n_psi();
  const Eigen::Index ms = q_psi.rows();
  const Matrix block = q_psi * teacher.psi(x).topLeftCorner(mt, mt) * q_psi.transpose();
  Matrix out = Matrix::Zero(student_n(), student_n());
  out.topLeftCorner(ms, ms) = SymmetricMatrix::symmetrized(block).matrix();
  return out;
}

MetaFeatures TeacherStudent::student_features(const Matrix& inputs) const {
  MetaFeatures mf;
  mf.features.resize(student_n(), inputs.rows());
  for (Eigen::Index a = 0; a < inputs.rows(); ++a) {
    const Vector x = inputs.row(a).transpose();
    mf.features.col(a) = student_phi(x);
    mf.meta_features.push_back(student_psi(x));
  }
  return mf;
}

Vector TeacherStudent::student_outputs(const Matrix& inputs, const Vector& theta) const {
  require(theta.size() == student_n(), "student_outputs: weight vector size mismatch");
  Vector lifted(teacher.n());
  lifted.head(teacher.n_psi()) = q_psi.transpose() * theta.head(q_psi.rows());
  if (teacher.n_phi() > 0)
    lifted.tail(teacher.n_phi()) = q_phi.transpose() * theta.tail(q_phi.rows());
  Vector z(inputs.rows());
  for (Eigen::Index a = 0; a < inputs.rows(); ++a)
    z(a) = teacher_output(teacher, inputs.row(a).transpose(), lifted, zeta_student);
  return z;
}

QuadraticModel make_student_model(const TeacherStudent& ts, Rng& rng) {
  MetaFeatures mf = ts.student_features(ts.data.inputs);
  Vector theta = rng.normal_vector(ts.student_n());
  const QuadraticVariant variant =
      ts.q_phi.rows() == 0 ? QuadraticVariant::pure : QuadraticVariant::with_bias;
  return QuadraticModel(std::move(theta), std::move(mf.features), std::move(mf.meta_features),
                        ts.zeta_student, variant);
}

// ---------------------------------------------------------------------------

FormatError::FormatError(const std::string& path, std::uint64_t offset, const std::string& what)
    : std::runtime_error(path + " @ byte " + std::to_string(offset) + ": " + what),
      path_(path),
      offset_(offset) {}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path, 0, "cannot open file");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& path) {
  if (bytes.size() < offset + 4) throw FormatError(path, bytes.size(), "truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;
constexpr std::size_t kCifarRecord = 1 + 3072;

}  // namespace

Matrix LabeledImages::rows(const std::vector<Eigen::Index>& which) const {
  Matrix out(static_cast<Eigen::Index>(which.size()), dim);
  for (std::size_t r = 0; r < which.size(); ++r) {
    const std::uint8_t* src = bytes.data() + which[r] * dim;
    for (Eigen::Index j = 0; j < dim; ++j) out(static_cast<Eigen::Index>(r), j) = src[j] / 255.0;
  }
  return out;
}

LabeledImages read_idx(const std::string& images_path, const std::string& labels_path) {
  std::vector<std::uint8_t> img = read_file(images_path);
  const std::vector<std::uint8_t> lab = read_file(labels_path);

  const std::uint32_t img_magic = read_be32(img, 0, images_path);
  if (img_magic != kIdxImages)
    throw FormatError(images_path, 0, "image magic is not 0x00000803");
  const std::uint32_t count = read_be32(img, 4, images_path);
  const std::uint32_t rows = read_be32(img, 8, images_path);
  const std::uint32_t cols = read_be32(img, 12, images_path);
  const std::uint64_t pixel_bytes = std::uint64_t{count} * rows * cols;
  if (img.size() - 16 < pixel_bytes)
    throw FormatError(images_path, img.size(),
                      "truncated: header declares " + std::to_string(pixel_bytes) + " pixel bytes");

  const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != kIdxLabels)
    throw FormatError(labels_path, 0, "label magic is not 0x00000801");
  const std::uint32_t lab_count = read_be32(lab, 4, labels_path);
  if (lab_count != count)
    throw FormatError(labels_path, 4,
                      "label count " + std::to_string(lab_count) + " != image count " +
                          std::to_string(count));
  if (lab.size() - 8 < lab_count)
    throw FormatError(labels_path, lab.size(), "truncated: header declares " +
                                                   std::to_string(lab_count) + " labels");

  LabeledImages out;
  out.dim = static_cast<Eigen::Index>(rows) * cols;
  out.labels.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const int label = lab[8 + i];
    if (label > 9) throw FormatError(labels_path, 8 + i, "unknown class id " + std::to_string(label));
    out.labels[i] = label;
  }
  img.erase(img.begin(), img.begin() + 16);
  img.resize(pixel_bytes);
  out.bytes = std::move(img);
  return out;
}

LabeledImages read_cifar_binary(const std::string& path) {
  const std::vector<std::uint8_t> raw = read_file(path);
  if (raw.size() % kCifarRecord != 0)
    throw FormatError(path, raw.size() - raw.size() % kCifarRecord,
                      "truncated record (file size is not a multiple of 3073)");
  const std::size_t count = raw.size() / kCifarRecord;
  LabeledImages out;
  out.dim = 3072;
  out.labels.resize(count);
  out.bytes.resize(count * 3072);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t offset = r * kCifarRecord;
    const int label = raw[offset];
    if (label > 9) throw FormatError(path, offset, "unknown class id " + std::to_string(label));
    out.labels[r] = label;
    std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(offset + 1), 3072,
                out.bytes.begin() + static_cast<std::ptrdiff_t>(r * 3072));
  }
  return out;
}

namespace {

LabeledImages concat(const std::vector<std::string>& paths) {
  LabeledImages all;
  all.dim = 3072;
  for (const std::string& p : paths) {
    LabeledImages part = read_cifar_binary(p);
    all.bytes.insert(all.bytes.end(), part.bytes.begin(), part.bytes.end());
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
  }
  return all;
}

std::vector<Eigen::Index> matching(const LabeledImages& images, int a, int b) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < images.count(); ++i)
    if (images.labels[i] == a || images.labels[i] == b) idx.push_back(i);
  return idx;
}

Vector signed_labels(const LabeledImages& images, const std::vector<Eigen::Index>& idx, int a) {
  Vector y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r)
    y(static_cast<Eigen::Index>(r)) = images.labels[idx[r]] == a ? -1.0 : 1.0;
  return y;
}

}  // namespace

Dataset load_two_class_images(ImageFormat format, const ImagePaths& paths, int class_a,
                              int class_b, Eigen::Index train_size, std::uint64_t shuffle_seed) {
  require(0 <= class_a && class_a <= 9 && 0 <= class_b && class_b <= 9 && class_a != class_b,
          "load_two_class_images: classes must be distinct ids in 0..9");
  require(train_size >= 1, "load_two_class_images: train_size must be >= 1");

  LabeledImages train;
  LabeledImages test;
  if (format == ImageFormat::idx) {
    train = read_idx(paths.train_images, paths.train_labels);
    test = read_idx(paths.test_images, paths.test_labels);
  } else {
    require(!paths.train_batches.empty() && !paths.test_batches.empty(),
            "load_two_class_images: cifar_binary needs train and test batch files");
    train = concat(paths.train_batches);
    test = concat(paths.test_batches);
  }
  require(train.dim == test.dim, "load_two_class_images: train and test image sizes differ");

  std::vector<Eigen::Index> train_idx = matching(train, class_a, class_b);
  if (shuffle_seed != 0) {
    // Fisher-Yates with the artifact generator, so the order is portable.
    Rng rng(shuffle_seed);
    for (std::size_t i = train_idx.size(); i > 1; --i)
      std::swap(train_idx[i - 1], train_idx[rng.next_u64() % i]);
  }
  require(static_cast<Eigen::Index>(train_idx.size()) >= train_size,
          "load_two_class_images: only " + std::to_string(train_idx.size()) +
              " training images match the two classes");
  train_idx.resize(static_cast<std::size_t>(train_size));
  const std::vector<Eigen::Index> test_idx = matching(test, class_a, class_b);

  Dataset d;
  d.inputs = train.rows(train_idx);
  d.labels = signed_labels(train, train_idx, class_a);
  d.test_inputs = test.rows(test_idx);
  d.test_labels = signed_labels(test, test_idx, class_a);
  d.provenance = Provenance::image_two_class;
  return d;
}

}  // namespace catapult
