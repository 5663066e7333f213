#include "covshift/ridge.hpp"

#include <cmath>
#include <stdexcept>

namespace covshift {

Vector KernelRidgeModel::predict(const Matrix& X) const {
  if (X.cols() != anchors.cols()) throw DimensionMismatch("kernel ridge predict: column dimension mismatch");
  return cross_gram(kernel, X, anchors) * alpha;
}

Predictor KernelRidgeModel::as_predictor() const {
  return [m = *this](const Matrix& X) { return m.predict(X); };
}

double KernelRidgeModel::rkhs_norm_squared() const { return alpha.dot(gram(kernel, anchors) * alpha); }

KernelRidgeModel fit_kernel_ridge(const Matrix& X, const Vector& y, double gamma, const KernelSpec& kernel) {
  if (!(gamma > 0.0)) throw std::invalid_argument("fit_kernel_ridge: gamma must be positive");
  if (X.rows() == 0) throw std::invalid_argument("fit_kernel_ridge: empty training set");
  if (y.size() != X.rows()) throw DimensionMismatch("fit_kernel_ridge: label length mismatch");
  const Index m = X.rows();
  Matrix A = gram(kernel, X);
  A.diagonal().array() += static_cast<double>(m) * gamma;
  const Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw std::runtime_error("fit_kernel_ridge: Cholesky factorization failed");
  KernelRidgeModel model;
  model.alpha = llt.solve(y);
  if (!model.alpha.allFinite()) throw std::runtime_error("fit_kernel_ridge: non-finite coefficients");
  model.anchors = X;
  model.gamma = gamma;
  model.kernel = kernel;
  return model;
}

double kernel_ridge_objective(const Matrix& K, const Vector& y, double gamma, const Vector& alpha) {
  const double m = static_cast<double>(y.size());
  return (K * alpha - y).squaredNorm() / m + gamma * alpha.dot(K * alpha);
}

Vector kernel_ridge_gradient(const Matrix& K, const Vector& y, double gamma, const Vector& alpha) {
  const double m = static_cast<double>(y.size());
  const Vector Ka = K * alpha;
  return (2.0 / m) * (K * (Ka - y)) + 2.0 * gamma * Ka;
}

std::string to_string(GammaRule r) {
  switch (r) {
    case GammaRule::ThetaOptimal: return "theta";
    case GammaRule::InverseN: return "n";
    case GammaRule::InverseNtr: return "ntr";
    case GammaRule::Fixed: return "fixed";
  }
  return "?";
}

GammaRule gamma_rule_from_string(const std::string& s) {
  if (s == "theta") return GammaRule::ThetaOptimal;
  if (s == "n") return GammaRule::InverseN;
  if (s == "ntr") return GammaRule::InverseNtr;
  if (s == "fixed") return GammaRule::Fixed;
  throw std::invalid_argument("unknown gamma rule '" + s + "'");
}

void GammaSchedule::validate() const {
  if (rule == GammaRule::ThetaOptimal && !(theta > 0.0)) throw std::invalid_argument("gamma schedule: theta must be > 0");
  if (rule == GammaRule::Fixed && !(fixed_value && *fixed_value > 0.0))
    throw std::invalid_argument("gamma schedule: fixed rule needs a positive value");
}

double schedule_gamma(const GammaSchedule& s, Index n_tr, Index n_te) {
  s.validate();
  if (n_tr < 1 || n_te < 1) throw std::invalid_argument("schedule_gamma: sample sizes must be >= 1");
  const double n = static_cast<double>(std::min(n_tr, n_te));
  switch (s.rule) {
    case GammaRule::ThetaOptimal: return std::pow(n, -(s.theta + 2.0) / (s.theta + 1.0));
    case GammaRule::InverseN: return 1.0 / n;
    case GammaRule::InverseNtr: return 1.0 / static_cast<double>(n_tr);
    case GammaRule::Fixed: return *s.fixed_value;
  }
  return 0.0;
}

Predictor LinearModel::as_predictor() const {
  return [m = *this](const Matrix& X) { return m.predict(X); };
}

LinearModel fit_lasso_linear(const Matrix& X, const Vector& y, double lambda, double tol, int max_sweeps) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("fit_lasso_linear: lambda must be nonnegative");
  if (X.rows() == 0) throw std::invalid_argument("fit_lasso_linear: empty training set");
  if (y.size() != X.rows()) throw DimensionMismatch("fit_lasso_linear: label length mismatch");
  const Index m = X.rows(), p = X.cols();
  const double md = static_cast<double>(m);

  // Centering removes the intercept from the coordinate updates.
  const Eigen::RowVectorXd xbar = X.colwise().mean();
  const double ybar = y.mean();
  const Matrix Xc = X.rowwise() - xbar;
  const Vector var = Xc.colwise().squaredNorm().transpose() / md;

  Vector w = Vector::Zero(p);
  Vector r = y.array() - ybar;  // residual y_c - Xc w
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Index j = 0; j < p; ++j) {
      if (var(j) <= 0.0) continue;
      const double rho = Xc.col(j).dot(r) / md + var(j) * w(j);
      const double wj = std::copysign(std::max(std::abs(rho) - lambda / 2.0, 0.0), rho) / var(j);
      if (wj != w(j)) {
        r -= (wj - w(j)) * Xc.col(j);
        w(j) = wj;
      }
    }
    // Optimality: |(2/m) x_j^T r| <= lambda at zero coefficients, equal to
    // lambda sign(w_j) otherwise.
    double viol = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (var(j) <= 0.0) continue;
      const double g = 2.0 * Xc.col(j).dot(r) / md;
      viol = std::max(viol, w(j) == 0.0 ? std::max(std::abs(g) - lambda, 0.0)
                                        : std::abs(g - lambda * (w(j) > 0 ? 1.0 : -1.0)));
    }
    if (viol <= tol) break;
  }
  LinearModel model;
  model.w = w;
  model.intercept = ybar - xbar.dot(w);
  return model;
}

}  // namespace covshift
