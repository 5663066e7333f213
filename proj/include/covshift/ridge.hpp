#pragma once

#include <optional>
#include <string>

#include "covshift/kernels.hpp"
#include "covshift/types.hpp"

namespace covshift {

/// Representer expansion g(x) = sum_j alpha_j k(anchor_j, x) of the
/// regularized least-squares fit
///
///   argmin_f (1/m) sum_j (f(x_j) - y_j)^2 + gamma ||f||_H^2,
///
/// whose coefficients solve (K + m gamma I) alpha = y.
struct KernelRidgeModel {
  Vector alpha;
  Matrix anchors;
  double gamma = 0.0;
  KernelSpec kernel;

  Vector predict(const Matrix& X) const;
  Predictor as_predictor() const;
  /// alpha^T K alpha
  double rkhs_norm_squared() const;
};

KernelRidgeModel fit_kernel_ridge(const Matrix& X, const Vector& y, double gamma, const KernelSpec& kernel);

inline KernelRidgeModel fit_kernel_ridge(const Dataset& train, double gamma, const KernelSpec& kernel) {
  return fit_kernel_ridge(train.X, train.labels(), gamma, kernel);
}

inline Vector predict(const KernelRidgeModel& model, const Matrix& X) { return model.predict(X); }

/// Objective (1/m)||K alpha - y||^2 + gamma alpha^T K alpha of the fit above,
/// expressed in representer coefficients, and its gradient.
double kernel_ridge_objective(const Matrix& K, const Vector& y, double gamma, const Vector& alpha);
Vector kernel_ridge_gradient(const Matrix& K, const Vector& y, double gamma, const Vector& alpha);

enum class GammaRule { ThetaOptimal, InverseN, InverseNtr, Fixed };

std::string to_string(GammaRule r);
GammaRule gamma_rule_from_string(const std::string& s);

struct GammaSchedule {
  GammaRule rule = GammaRule::InverseNtr;
  double theta = 1.0;
  std::optional<double> fixed_value;

  void validate() const;
};

/// theta_optimal: n^{-(theta+2)/(theta+1)}, inverse_n: n^{-1}, with
/// n = min(n_tr, n_te); inverse_ntr: n_tr^{-1}; fixed: the fixed value.
double schedule_gamma(const GammaSchedule& s, Index n_tr, Index n_te);

struct LinearModel {
  Vector w;
  double intercept = 0.0;

  Vector predict(const Matrix& X) const { return (X * w).array() + intercept; }
  Predictor as_predictor() const;
};

/// Coordinate descent on (1/m)||y - Xw - b||^2 + lambda ||w||_1 with an
/// unpenalized intercept. Stops when the subgradient optimality violation
/// drops below tol.
LinearModel fit_lasso_linear(const Matrix& X, const Vector& y, double lambda, double tol = 1e-6,
                             int max_sweeps = 100000);

}  // namespace covshift
