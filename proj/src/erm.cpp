#include "covshift/erm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace covshift {

std::string to_string(ErmLoss l) { return l == ErmLoss::Squared ? "squared" : "logistic"; }

std::string to_string(ErmMode m) {
  switch (m) {
    case ErmMode::Robust: return "robust";
    case ErmMode::KmmWeighted: return "kmm";
    case ErmMode::UnweightedNr: return "unweighted";
  }
  return "?";
}

ErmLoss erm_loss_from_string(const std::string& s) {
  if (s == "squared") return ErmLoss::Squared;
  if (s == "logistic") return ErmLoss::Logistic;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

ErmMode erm_mode_from_string(const std::string& s) {
  if (s == "robust") return ErmMode::Robust;
  if (s == "kmm") return ErmMode::KmmWeighted;
  if (s == "unweighted") return ErmMode::UnweightedNr;
  throw std::invalid_argument("unknown ERM mode '" + s + "'");
}

void ErmProblem::validate() const {
  kernel.validate();
  if (!(lambda > 0.0)) throw std::invalid_argument("erm: lambda must be positive");
}

Vector predict_erm(const ErmFit& fit, const Matrix& X) {
  if (X.cols() != fit.span.cols()) throw DimensionMismatch("predict_erm: column dimension mismatch");
  return cross_gram(fit.kernel, X, fit.span) * fit.alpha;
}

Vector classify_erm(const ErmFit& fit, const Matrix& X) {
  const Vector score = predict_erm(fit, X);
  Vector out(score.size());
  for (Index i = 0; i < score.size(); ++i)
    out(i) = fit.loss == ErmLoss::Squared ? (score(i) >= 0.5 ? 1.0 : 0.0) : (score(i) <= 0.0 ? 1.0 : 0.0);
  return out;
}

namespace {

// log(1 + exp(t)) without overflow
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

// 1 / (1 + exp(t))
double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw DimensionMismatch("erm: train and test column counts differ");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

void check_lambda(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("erm: lambda must be positive");
}

void check_robust_inputs(const Matrix& X_kmm, const Vector& y_kmm, const Matrix& X_test, const Vector& beta,
                         double lambda) {
  check_lambda(lambda);
  if (X_kmm.rows() == 0 || X_test.rows() == 0) throw std::invalid_argument("erm: empty training or test block");
  if (y_kmm.size() != X_kmm.rows() || beta.size() != X_kmm.rows())
    throw DimensionMismatch("erm: labels/weights do not match the weighted training rows");
  if (X_kmm.cols() != X_test.cols()) throw DimensionMismatch("erm: train and test column counts differ");
}

Vector solve_general(const Matrix& A, const Vector& rhs, const char* what) {
  const Eigen::PartialPivLU<Matrix> lu(A);
  const double rc = lu.rcond();
  if (!(rc > 1e-14))
    throw std::runtime_error(std::string(what) + ": system is numerically singular (rcond " + std::to_string(rc) +
                             "); increase lambda");
  Vector x = lu.solve(rhs);
  const double res = (A * x - rhs).norm();
  if (!x.allFinite() || res > 1e-8 * std::max(1.0, rhs.norm()))
    throw std::runtime_error(std::string(what) + ": linear solve residual too large; increase lambda");
  return x;
}

Vector clipped(const Vector& v) { return v.unaryExpr([](double p) { return clip_probability(p); }); }

ErmFit logistic_fit(const LogisticObjective& obj, const LogisticOptions& opts, Matrix span, const KernelSpec& kernel,
                    ErmMode mode, double lambda, Index n_train, Index n_test) {
  const auto res = minimize_logistic(obj, opts);
  ErmFit fit;
  fit.alpha = res.alpha;
  fit.span = std::move(span);
  fit.kernel = kernel;
  fit.loss = ErmLoss::Logistic;
  fit.mode = mode;
  fit.lambda = lambda;
  fit.objective = res.objective;
  fit.grad_norm = res.grad_norm;
  fit.iterations = res.iterations;
  fit.converged = res.converged;
  fit.n_train_block = n_train;
  fit.n_test_block = n_test;
  return fit;
}

}  // namespace

double clip_probability(double p) { return std::clamp(p, 1e-6, 1.0 - 1e-6); }

double RobustLeastSquaresObjective::value(const Vector& alpha) const {
  const Vector Ka = K * alpha;
  const Vector r = w2 - Ka;
  return -2.0 * w1.dot(Ka) / k + lambda * alpha.dot(Ka) + (w3.array() * r.array().square()).sum() / n_te;
}

Vector RobustLeastSquaresObjective::gradient(const Vector& alpha) const {
  const Vector Ka = K * alpha;
  const Vector r = w2 - Ka;
  return K * Vector(-2.0 * w1 / k + 2.0 * lambda * alpha - (2.0 / n_te) * Vector(w3.array() * r.array()));
}

double LogisticObjective::value(const Vector& alpha) const {
  const Vector z = K * alpha;
  double f = u.dot(z) + lambda * alpha.dot(z);
  for (Index i = 0; i < z.size(); ++i)
    if (s(i) != 0.0) f += s(i) * softplus(-z(i));
  return f;
}

Vector LogisticObjective::gradient(const Vector& alpha) const {
  const Vector z = K * alpha;
  Vector v = u + 2.0 * lambda * alpha;
  for (Index i = 0; i < z.size(); ++i) v(i) -= s(i) * sigmoid_neg(z(i));
  return K * v;
}

LogisticSolveResult minimize_logistic(const LogisticObjective& obj, const LogisticOptions& opts, bool record_trace) {
  if (!(obj.lambda > 0.0)) throw std::invalid_argument("logistic: lambda must be positive");
  if ((obj.s.array() < 0.0).any()) throw std::invalid_argument("logistic: softplus weights must be nonnegative");
  const Index n = obj.K.rows();
  auto value_at = [&](const Vector& a, const Vector& z) {
    double f = obj.u.dot(z) + obj.lambda * a.dot(z);
    for (Index i = 0; i < n; ++i)
      if (obj.s(i) != 0.0) f += obj.s(i) * softplus(-z(i));
    return f;
  };

  LogisticSolveResult res;
  Vector alpha = Vector::Zero(n);
  Vector z = Vector::Zero(n);
  double f = value_at(alpha, z);
  double step = 1.0;
  if (record_trace) res.trace.push_back(f);
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if (it % 50 == 49) z = obj.K * alpha;  // limit drift of the running product
    Vector v = obj.u + 2.0 * obj.lambda * alpha;
    for (Index i = 0; i < n; ++i) v(i) -= obj.s(i) * sigmoid_neg(z(i));
    const Vector Kv = obj.K * v;
    res.grad_norm = Kv.norm();
    if (res.grad_norm <= opts.tol) {
      res.converged = true;
      break;
    }
    const double slope = -v.dot(Kv);
    if (!(slope < 0.0)) break;
    bool accepted = false;
    for (; step > 1e-20; step *= 0.5) {
      const Vector a_new = alpha - step * v;
      const Vector z_new = z - step * Kv;
      const double f_new = value_at(a_new, z_new);
      if (f_new <= f + 1e-4 * step * slope) {
        alpha = a_new;
        z = z_new;
        f = f_new;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (record_trace) res.trace.push_back(f);
    step = std::min(step * 2.0, 1e8);
  }
  res.iterations = it;
  res.alpha = std::move(alpha);
  res.objective = obj.value(res.alpha);
  res.grad_norm = obj.gradient(res.alpha).norm();
  res.converged = res.grad_norm <= opts.tol;
  return res;
}

RobustLeastSquaresObjective make_robust_least_squares_objective(const Matrix& X_kmm, const Vector& y_kmm,
                                                                const Matrix& X_test, const Vector& beta,
                                                                const Predictor& g_hat, double lambda,
                                                                const KernelSpec& kernel) {
  check_robust_inputs(X_kmm, y_kmm, X_test, beta, lambda);
  const Index k = X_kmm.rows(), nt = X_test.rows();
  RobustLeastSquaresObjective obj;
  obj.K = gram(kernel, stack_rows(X_kmm, X_test));
  obj.w1 = Vector::Zero(k + nt);
  obj.w2 = Vector::Zero(k + nt);
  obj.w3 = Vector::Zero(k + nt);
  obj.w1.head(k) = beta.array() * (y_kmm - g_hat(X_kmm)).array();
  obj.w2.tail(nt) = g_hat(X_test);
  obj.w3.tail(nt).setOnes();
  obj.k = static_cast<double>(k);
  obj.n_te = static_cast<double>(nt);
  obj.lambda = lambda;
  return obj;
}

LogisticObjective make_robust_logistic_objective(const Matrix& X_kmm, const Vector& y_kmm, const Matrix& X_test,
                                                 const Vector& beta, const Predictor& g_hat, double lambda,
                                                 const KernelSpec& kernel) {
  check_robust_inputs(X_kmm, y_kmm, X_test, beta, lambda);
  const Index k = X_kmm.rows(), nt = X_test.rows();
  const double kd = static_cast<double>(k), nd = static_cast<double>(nt);
  LogisticObjective obj;
  obj.K = gram(kernel, stack_rows(X_kmm, X_test));
  obj.u = Vector::Zero(k + nt);
  obj.s = Vector::Zero(k + nt);
  obj.u.head(k) = (beta.array() * (y_kmm - clipped(g_hat(X_kmm))).array()) / kd;
  obj.u.tail(nt) = clipped(g_hat(X_test)) / nd;
  obj.s.tail(nt).setConstant(1.0 / nd);
  obj.lambda = lambda;
  return obj;
}

ErmFit fit_robust_least_squares(const Matrix& X_kmm, const Vector& y_kmm, const Matrix& X_test, const Vector& beta,
                                const Predictor& g_hat, double lambda, const KernelSpec& kernel) {
  const auto obj = make_robust_least_squares_objective(X_kmm, y_kmm, X_test, beta, g_hat, lambda, kernel);
  Matrix A = obj.w3.asDiagonal() * obj.K;
  A.diagonal().array() += lambda * obj.n_te;
  const Vector rhs = (obj.n_te / obj.k) * obj.w1 + obj.w2;
  ErmFit fit;
  fit.alpha = solve_general(A, rhs, "fit_robust_least_squares");
  fit.span = stack_rows(X_kmm, X_test);
  fit.kernel = kernel;
  fit.loss = ErmLoss::Squared;
  fit.mode = ErmMode::Robust;
  fit.lambda = lambda;
  fit.objective = obj.value(fit.alpha);
  fit.grad_norm = obj.gradient(fit.alpha).norm();
  fit.n_train_block = X_kmm.rows();
  fit.n_test_block = X_test.rows();
  return fit;
}

ErmFit fit_robust_logistic(const Matrix& X_kmm, const Vector& y_kmm, const Matrix& X_test, const Vector& beta,
                           const Predictor& g_hat, double lambda, const KernelSpec& kernel,
                           const LogisticOptions& opts) {
  const auto obj = make_robust_logistic_objective(X_kmm, y_kmm, X_test, beta, g_hat, lambda, kernel);
  return logistic_fit(obj, opts, stack_rows(X_kmm, X_test), kernel, ErmMode::Robust, lambda, X_kmm.rows(),
                      X_test.rows());
}

ErmFit fit_kmm_weighted_ridge(const Matrix& X_train, const Vector& y, const Vector& beta, double lambda,
                              const KernelSpec& kernel, Index n_te) {
  check_lambda(lambda);
  if (X_train.rows() == 0) throw std::invalid_argument("kmm ridge: empty training set");
  if (y.size() != X_train.rows() || beta.size() != X_train.rows())
    throw DimensionMismatch("kmm ridge: labels/weights do not match training rows");
  if (n_te < 1) throw std::invalid_argument("kmm ridge: n_te must be >= 1");
  const double nd = static_cast<double>(n_te);
  const Matrix K = gram(kernel, X_train);
  Matrix A = beta.asDiagonal() * K;
  A.diagonal().array() += nd * lambda;
  const Vector by = beta.array() * y.array();

  ErmFit fit;
  fit.alpha = solve_general(A, by, "fit_kmm_weighted_ridge");
  // Stationary point of (1/n_te) sum_j beta_j (y_j - theta(x_j))^2 + lambda ||theta||^2.
  const Vector Ka = K * fit.alpha;
  const Vector r = Ka - y;
  fit.objective = (beta.array() * r.array().square()).sum() / nd + lambda * fit.alpha.dot(Ka);
  fit.grad_norm = (K * Vector((2.0 / nd) * Vector(beta.array() * r.array()) + 2.0 * lambda * fit.alpha)).norm();
  fit.span = X_train;
  fit.kernel = kernel;
  fit.loss = ErmLoss::Squared;
  fit.mode = ErmMode::KmmWeighted;
  fit.lambda = lambda;
  fit.n_train_block = X_train.rows();
  return fit;
}

ErmFit fit_kmm_weighted_logistic(const Matrix& X_train, const Vector& y, const Vector& beta, double lambda,
                                 const KernelSpec& kernel, const LogisticOptions& opts) {
  check_lambda(lambda);
  if (X_train.rows() == 0) throw std::invalid_argument("kmm logistic: empty training set");
  if (y.size() != X_train.rows() || beta.size() != X_train.rows())
    throw DimensionMismatch("kmm logistic: labels/weights do not match training rows");
  const double nd = static_cast<double>(X_train.rows());
  LogisticObjective obj;
  obj.K = gram(kernel, X_train);
  obj.u = (beta.array() * y.array()) / nd;
  obj.s = beta / nd;
  obj.lambda = lambda;
  return logistic_fit(obj, opts, X_train, kernel, ErmMode::KmmWeighted, lambda, X_train.rows(), 0);
}

ErmFit fit_unweighted_nr_erm(const Matrix& X_test, const Predictor& g_hat, double lambda, const KernelSpec& kernel,
                             ErmLoss loss, const LogisticOptions& opts) {
  check_lambda(lambda);
  if (X_test.rows() == 0) throw std::invalid_argument("unweighted erm: empty test set");
  const Index nt = X_test.rows();
  const double nd = static_cast<double>(nt);
  if (loss == ErmLoss::Logistic) {
    LogisticObjective obj;
    obj.K = gram(kernel, X_test);
    obj.u = clipped(g_hat(X_test)) / nd;
    obj.s = Vector::Constant(nt, 1.0 / nd);
    obj.lambda = lambda;
    return logistic_fit(obj, opts, X_test, kernel, ErmMode::UnweightedNr, lambda, 0, nt);
  }
  RobustLeastSquaresObjective obj;
  obj.K = gram(kernel, X_test);
  obj.w1 = Vector::Zero(nt);
  obj.w2 = g_hat(X_test);
  obj.w3 = Vector::Ones(nt);
  obj.k = 1.0;
  obj.n_te = nd;
  obj.lambda = lambda;
  Matrix A = obj.K;
  A.diagonal().array() += lambda * nd;
  const Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw std::runtime_error("fit_unweighted_nr_erm: Cholesky factorization failed");
  ErmFit fit;
  fit.alpha = llt.solve(obj.w2);
  fit.span = X_test;
  fit.kernel = kernel;
  fit.loss = ErmLoss::Squared;
  fit.mode = ErmMode::UnweightedNr;
  fit.lambda = lambda;
  fit.objective = obj.value(fit.alpha);
  fit.grad_norm = obj.gradient(fit.alpha).norm();
  fit.n_test_block = nt;
  return fit;
}

Vector weighted_linear_fit(const Matrix& X, const Vector& y, const Vector& beta) {
  if (y.size() != X.rows() || beta.size() != X.rows()) throw DimensionMismatch("weighted_linear_fit: length mismatch");
  const Matrix H = X.transpose() * beta.asDiagonal() * X;
  const Vector rhs = X.transpose() * Vector(beta.array() * y.array());
  const Eigen::LDLT<Matrix> ldlt(H);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
    throw std::runtime_error("weighted_linear_fit: singular normal equations");
  return ldlt.solve(rhs);
}

Vector robust_linear_fit(const Matrix& X_kmm, const Vector& y_kmm, const Matrix& X_test, const Vector& beta,
                         const Predictor& g_hat) {
  if (y_kmm.size() != X_kmm.rows() || beta.size() != X_kmm.rows())
    throw DimensionMismatch("robust_linear_fit: length mismatch");
  if (X_kmm.cols() != X_test.cols()) throw DimensionMismatch("robust_linear_fit: column mismatch");
  const double k = static_cast<double>(X_kmm.rows()), n = static_cast<double>(X_test.rows());
  const Vector residual = y_kmm - g_hat(X_kmm);
  const Matrix H = X_test.transpose() * X_test / n;
  const Vector rhs =
      X_test.transpose() * g_hat(X_test) / n + X_kmm.transpose() * Vector(beta.array() * residual.array()) / k;
  const Eigen::LDLT<Matrix> ldlt(H);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
    throw std::runtime_error("robust_linear_fit: singular test second-moment matrix");
  return ldlt.solve(rhs);
}

}  // namespace covshift
