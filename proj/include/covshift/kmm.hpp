#pragma once

#include <optional>

#include "covshift/kernels.hpp"
#include "covshift/qp.hpp"
#include "covshift/types.hpp"

namespace covshift {

struct KmmConfig {
  KernelSpec kernel;
  double B = 1000.0;
  /// Band half-width on mean(beta); unset means (sqrt(n_tr) - 1) / sqrt(n_tr).
  std::optional<double> epsilon;
  bool include_band = true;
  QpOptions<double> qp;

  void validate() const;
};

/// Default band half-width for n_tr training rows.
double default_epsilon(Index n_tr);

struct ImportanceWeights {
  Vector beta;
  /// Squared RKHS distance between the weighted training mean and the test mean.
  double l_hat = 0.0;
  double kkt_residual = 0.0;
  double mean_beta = 0.0;
  double B = 0.0;
  double epsilon = 0.0;
  bool band = false;
  int iterations = 0;
  bool converged = false;
};

/// Kernel mean matching weights for the training rows.
///
/// Solves min (1/n_tr^2)(b^T K b - 2 kappa^T b) over 0 <= b <= B, optionally
/// with |mean(b) - 1| <= epsilon, where kappa_j = (n_tr/n_te) sum_i k(x_j, x_i^te).
/// The solver starts from the all-ones vector (projected), so the uniform
/// weighting is never beaten by a worse iterate.
ImportanceWeights kmm_weights(const Matrix& train, const Matrix& test, const KmmConfig& cfg);

inline ImportanceWeights kmm_weights(const Dataset& train, const Dataset& test, const KmmConfig& cfg) {
  return kmm_weights(train.X, test.X, cfg);
}

/// The squared mean discrepancy of an arbitrary weight vector (same quantity
/// reported as l_hat).
double mean_discrepancy(const Matrix& train, const Matrix& test, const KernelSpec& kernel, const Vector& beta);

/// High-probability bound sqrt(2 log(2/delta)) R sqrt(B^2/n_tr + 1/n_te) on
/// the (unsquared) mean discrepancy of the true density ratio.
double mean_discrepancy_bound(double n_tr, double n_te, double B, double R, double delta);

}  // namespace covshift
