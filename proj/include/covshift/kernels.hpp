#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "covshift/types.hpp"

namespace covshift {

enum class KernelFamily { Gaussian, Polynomial };

/// Kernel family plus hyperparameters.
///
///   Gaussian:   k(x, x') = exp(-sigma * ||x - x'||)   (unsquared distance)
///   Polynomial: k(x, x') = (offset + x . x')^degree
struct KernelSpec {
  KernelFamily family = KernelFamily::Gaussian;
  double sigma = 1.0;
  int degree = 3;
  double offset = 1.0;

  static KernelSpec gaussian(double sigma) {
    KernelSpec k;
    k.family = KernelFamily::Gaussian;
    k.sigma = sigma;
    k.validate();
    return k;
  }

  static KernelSpec polynomial(int degree, double offset = 1.0) {
    KernelSpec k;
    k.family = KernelFamily::Polynomial;
    k.degree = degree;
    k.offset = offset;
    k.validate();
    return k;
  }

  void validate() const {
    if (family == KernelFamily::Gaussian && !(sigma > 0.0))
      throw std::invalid_argument("gaussian kernel requires sigma > 0");
    if (family == KernelFamily::Polynomial) {
      if (degree < 1) throw std::invalid_argument("polynomial kernel requires degree >= 1");
      if (!(offset >= 0.0)) throw std::invalid_argument("polynomial kernel requires offset >= 0");
    }
  }
};

inline std::string to_string(KernelFamily f) {
  return f == KernelFamily::Gaussian ? "gaussian" : "polynomial";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "gaussian") return KernelFamily::Gaussian;
  if (s == "polynomial") return KernelFamily::Polynomial;
  throw std::invalid_argument("unknown kernel family '" + s + "'");
}

namespace detail {

template <typename Scalar>
Scalar ipow(Scalar base, int exp) {
  Scalar out(1);
  while (exp > 0) {
    if (exp & 1) out *= base;
    base *= base;
    exp >>= 1;
  }
  return out;
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& X, const char* what) {
  if (!X.allFinite()) throw std::invalid_argument(std::string(what) + " contains NaN or Inf");
}

}  // namespace detail

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar kernel_value(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& a,
                                       const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (spec.family == KernelFamily::Gaussian) {
    return std::exp(-Scalar(spec.sigma) * (a - b).norm());
  }
  return detail::ipow(Scalar(spec.offset) + a.dot(b), spec.degree);
}

/// K_ij = k(x_i, x_j) over the rows of X. Upper triangle is computed and
/// mirrored so the result is exactly symmetric.
template <typename Derived>
MatrixX<typename Derived::Scalar> gram(const KernelSpec& spec, const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  spec.validate();
  if (X.rows() == 0) throw std::invalid_argument("gram: empty dataset");
  detail::require_finite(X, "gram input");
  const Index n = X.rows();
  MatrixX<Scalar> K(n, n);
  for (Index i = 0; i < n; ++i) {
    K(i, i) = kernel_value(spec, X.row(i), X.row(i));
    for (Index j = i + 1; j < n; ++j) {
      const Scalar v = kernel_value(spec, X.row(i), X.row(j));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

/// Entry (i, j) = k(a_i, b_j).
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> cross_gram(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& A,
                                              const Eigen::MatrixBase<DerivedB>& B) {
  using Scalar = typename DerivedA::Scalar;
  spec.validate();
  if (A.cols() != B.cols())
    throw DimensionMismatch("cross_gram: column dimensions differ (" + std::to_string(A.cols()) + " vs " +
                            std::to_string(B.cols()) + ")");
  detail::require_finite(A, "cross_gram input");
  detail::require_finite(B, "cross_gram input");
  MatrixX<Scalar> K(A.rows(), B.rows());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < B.rows(); ++j) K(i, j) = kernel_value(spec, A.row(i), B.row(j));
  return K;
}

inline Matrix gram(const KernelSpec& spec, const Dataset& A) { return gram(spec, A.X); }

inline Matrix cross_gram(const KernelSpec& spec, const Dataset& A, const Dataset& B) {
  return cross_gram(spec, A.X, B.X);
}

/// Bound R on the feature-map norm: 1 for the Gaussian family, otherwise
/// max_i k(x_i, x_i)^{1/2} over the supplied rows.
template <typename Derived>
typename Derived::Scalar feature_bound(const KernelSpec& spec, const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  if (spec.family == KernelFamily::Gaussian) return Scalar(1);
  Scalar r(0);
  for (Index i = 0; i < X.rows(); ++i) r = std::max(r, std::sqrt(kernel_value(spec, X.row(i), X.row(i))));
  return r;
}

}  // namespace covshift
