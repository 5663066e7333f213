#pragma once

#include <string>
#include <vector>

#include "covshift/kernels.hpp"
#include "covshift/types.hpp"

namespace covshift {

enum class ErmLoss { Squared, Logistic };
enum class ErmMode { Robust, KmmWeighted, UnweightedNr };

std::string to_string(ErmLoss l);
std::string to_string(ErmMode m);
ErmLoss erm_loss_from_string(const std::string& s);
ErmMode erm_mode_from_string(const std::string& s);

struct ErmProblem {
  ErmLoss loss = ErmLoss::Squared;
  double lambda = 1.0;
  KernelSpec kernel;
  ErmMode mode = ErmMode::Robust;

  void validate() const;
};

/// theta(x) = sum_i alpha_i k(span_i, x). For the robust mode the span stacks
/// the weighted training rows on top of the test rows.
struct ErmFit {
  Vector alpha;
  Matrix span;
  KernelSpec kernel;
  ErmLoss loss = ErmLoss::Squared;
  ErmMode mode = ErmMode::Robust;
  double lambda = 0.0;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = true;
  Index n_train_block = 0;
  Index n_test_block = 0;
};

/// Scores theta(x) for each row of X.
Vector predict_erm(const ErmFit& fit, const Matrix& X);

/// Labels in {0,1}. Squared loss: score >= 0.5. Logistic loss: the model
/// assigns P(y=1|x) = 1/(1 + exp(theta(x))), so label 1 when theta(x) <= 0.
Vector classify_erm(const ErmFit& fit, const Matrix& X);

/// Robust penalized least squares in representer coefficients:
///   -2 w1^T K a / k + lambda a^T K a + (w2 - K a)^T W3 (w2 - K a) / n_te
struct RobustLeastSquaresObjective {
  Matrix K;
  Vector w1, w2, w3;
  double k = 1.0;
  double n_te = 1.0;
  double lambda = 1.0;

  double value(const Vector& alpha) const;
  Vector gradient(const Vector& alpha) const;
};

/// Generic kernel logistic objective
///   u^T z + sum_i s_i log(1 + exp(-z_i)) + lambda a^T K a,   z = K a,
/// with s >= 0; convex in a. All three logistic modes are instances.
struct LogisticObjective {
  Matrix K;
  Vector u;
  Vector s;
  double lambda = 1.0;

  double value(const Vector& alpha) const;
  Vector gradient(const Vector& alpha) const;
};

struct LogisticOptions {
  double tol = 1e-6;
  int max_iter = 100000;
};

/// g values are clipped to [1e-6, 1 - 1e-6] where the logistic objectives use them.
double clip_probability(double p);

RobustLeastSquaresObjective make_robust_least_squares_objective(const Matrix& X_kmm, const Vector& y_kmm,
                                                                const Matrix& X_test, const Vector& beta,
                                                                const Predictor& g_hat, double lambda,
                                                                const KernelSpec& kernel);

/// Robust logistic objective: the training block contributes
/// beta_j (y_j - g(x_j)) z_j / k, each test point g(x) z / n_te plus
/// log(1 + exp(-z)) / n_te.
LogisticObjective make_robust_logistic_objective(const Matrix& X_kmm, const Vector& y_kmm, const Matrix& X_test,
                                                 const Vector& beta, const Predictor& g_hat, double lambda,
                                                 const KernelSpec& kernel);

/// Closed form a = (W3 K + lambda n_te I)^{-1} ((n_te/k) w1 + w2), solved as a
/// general dense system (LU, partial pivoting).
ErmFit fit_robust_least_squares(const Matrix& X_kmm, const Vector& y_kmm, const Matrix& X_test, const Vector& beta,
                                const Predictor& g_hat, double lambda, const KernelSpec& kernel);

ErmFit fit_robust_logistic(const Matrix& X_kmm, const Vector& y_kmm, const Matrix& X_test, const Vector& beta,
                           const Predictor& g_hat, double lambda, const KernelSpec& kernel,
                           const LogisticOptions& opts = {});

/// a = (diag(beta) K + n_te lambda I)^{-1} diag(beta) y over the training rows.
ErmFit fit_kmm_weighted_ridge(const Matrix& X_train, const Vector& y, const Vector& beta, double lambda,
                              const KernelSpec& kernel, Index n_te);

/// (1/n_tr) sum_j beta_j l(x_j, y_j; theta) + lambda ||theta||^2 for the logistic loss.
ErmFit fit_kmm_weighted_logistic(const Matrix& X_train, const Vector& y, const Vector& beta, double lambda,
                                 const KernelSpec& kernel, const LogisticOptions& opts = {});

/// Plug-in risk on the test rows only (no training block).
ErmFit fit_unweighted_nr_erm(const Matrix& X_test, const Predictor& g_hat, double lambda, const KernelSpec& kernel,
                             ErmLoss loss, const LogisticOptions& opts = {});

/// Gradient descent in the RKHS metric (direction -K^{-1} grad, which needs
/// no solve) with Armijo backtracking. Stops on the Euclidean gradient norm.
struct LogisticSolveResult {
  Vector alpha;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};
LogisticSolveResult minimize_logistic(const LogisticObjective& obj, const LogisticOptions& opts,
                                      bool record_trace = false);

// ---------------------------------------------------------------------------
// Unregularized linear fits without intercept, theta(x) = w^T x.

/// argmin_w sum_j beta_j (y_j - w^T x_j)^2; beta = 1 gives OLS.
Vector weighted_linear_fit(const Matrix& X, const Vector& y, const Vector& beta);

/// argmin_w of the robust risk with a linear model: -(2/k) sum_j beta_j r_j w^T x_j
/// + (1/n_te) sum_i (g_i - w^T x_i)^2, with r_j = y_j - g(x_j).
Vector robust_linear_fit(const Matrix& X_kmm, const Vector& y_kmm, const Matrix& X_test, const Vector& beta,
                         const Predictor& g_hat);

}  // namespace covshift
