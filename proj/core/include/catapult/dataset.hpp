#pragma once

#include <optional>
#include <string>

#include "catapult/numerics.hpp"

namespace catapult {

enum class Provenance { toy, random, teacher_student, image_two_class };

std::string to_string(Provenance p);

/// Training inputs (one row per datapoint) and labels, with an optional
/// held-out split.
struct Dataset {
  Matrix inputs;  // D x d
  Vector labels;  // D
  std::optional<Matrix> test_inputs;
  std::optional<Vector> test_labels;
  Provenance provenance = Provenance::toy;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }
  bool has_test() const { return test_inputs.has_value() && test_labels.has_value(); }

  /// Throws InvalidInput if shapes disagree, D < 1 or labels are not finite.
  void validate() const;
};

}  // namespace catapult
