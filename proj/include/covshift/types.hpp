#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace covshift {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Role { Train, Test };

/// Covariates stored row-per-observation, with optional labels.
///
/// Labels on a test-role dataset are only allowed when flagged as held out;
/// they exist for final error reporting and never feed an estimator.
struct Dataset {
  Matrix X;
  std::optional<Vector> y;
  Role role = Role::Train;
  bool heldout_labels = false;

  Index rows() const { return X.rows(); }
  Index cols() const { return X.cols(); }
  bool has_labels() const { return y.has_value(); }
  const Vector& labels() const {
    if (!y) throw std::invalid_argument("dataset has no labels");
    return *y;
  }
};

inline Dataset make_train(Matrix X, Vector y) {
  return Dataset{std::move(X), std::move(y), Role::Train, false};
}

inline Dataset make_test(Matrix X) {
  return Dataset{std::move(X), std::nullopt, Role::Test, false};
}

/// Throws std::invalid_argument on NaN/Inf entries, label length mismatch or
/// labels on an unflagged test set.
inline void validate(const Dataset& d) {
  if (!d.X.allFinite()) throw std::invalid_argument("dataset contains NaN or Inf covariates");
  if (d.y) {
    if (d.y->size() != d.X.rows())
      throw DimensionMismatch("label vector length " + std::to_string(d.y->size()) +
                              " does not match row count " + std::to_string(d.X.rows()));
    if (!d.y->allFinite()) throw std::invalid_argument("dataset contains NaN or Inf labels");
    if (d.role == Role::Test && !d.heldout_labels)
      throw std::invalid_argument("test dataset carries labels without the held-out flag");
  }
}

inline Dataset subset_rows(const Dataset& d, std::span<const Index> rows) {
  Dataset out;
  out.role = d.role;
  out.heldout_labels = d.heldout_labels;
  out.X.resize(static_cast<Index>(rows.size()), d.X.cols());
  if (d.y) out.y = Vector(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Index>(i)) = d.X.row(rows[i]);
    if (d.y) (*out.y)(static_cast<Index>(i)) = (*d.y)(rows[i]);
  }
  return out;
}

/// A fitted regression function x -> ĝ(x), evaluated row-wise.
using Predictor = std::function<Vector(const Matrix&)>;

inline Predictor constant_predictor(double c) {
  return [c](const Matrix& X) { return Vector::Constant(X.rows(), c); };
}

inline Predictor zero_predictor() { return constant_predictor(0.0); }

}  // namespace covshift
