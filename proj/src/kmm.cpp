#include "covshift/kmm.hpp"

#include <cmath>
#include <stdexcept>

namespace covshift {

void KmmConfig::validate() const {
  kernel.validate();
  if (!(B > 0.0)) throw std::invalid_argument("kmm: B must be positive");
  if (epsilon && !(*epsilon >= 0.0)) throw std::invalid_argument("kmm: epsilon must be nonnegative");
}

double default_epsilon(Index n_tr) {
  const double r = std::sqrt(static_cast<double>(n_tr));
  return (r - 1.0) / r;
}

namespace {

struct KmmTerms {
  Matrix K;
  Vector kappa;
  double test_term;  // (1/n_te^2) 1^T K_te 1
};

KmmTerms assemble(const Matrix& train, const Matrix& test, const KernelSpec& kernel) {
  if (train.rows() == 0 || test.rows() == 0) throw std::invalid_argument("kmm: empty train or test set");
  if (train.cols() != test.cols()) throw DimensionMismatch("kmm: train and test column counts differ");
  const double n_tr = static_cast<double>(train.rows());
  const double n_te = static_cast<double>(test.rows());
  KmmTerms t;
  t.K = gram(kernel, train);
  t.kappa = (n_tr / n_te) * cross_gram(kernel, train, test).rowwise().sum();
  t.test_term = gram(kernel, test).sum() / (n_te * n_te);
  return t;
}

double l_hat_of(const KmmTerms& t, const Vector& beta) {
  const double n = static_cast<double>(beta.size());
  const double v = (beta.dot(t.K * beta) - 2.0 * t.kappa.dot(beta)) / (n * n) + t.test_term;
  return std::max(v, 0.0);
}

}  // namespace

ImportanceWeights kmm_weights(const Matrix& train, const Matrix& test, const KmmConfig& cfg) {
  cfg.validate();
  const KmmTerms terms = assemble(train, test, cfg.kernel);
  const Index n = train.rows();
  const double nd = static_cast<double>(n);

  // Objective scaled by n_tr/2 so gradients are O(1) regardless of n_tr.
  BoxBandQp<double> qp;
  qp.Q = terms.K / nd;
  qp.c = -terms.kappa / nd;
  qp.lower = Vector::Zero(n);
  qp.upper = Vector::Constant(n, cfg.B);
  const double eps = cfg.epsilon.value_or(default_epsilon(n));
  if (cfg.include_band) qp.band = Band<double>{Vector::Constant(n, 1.0 / nd), 1.0 - eps, 1.0 + eps};

  const auto sol = solve_qp(qp, cfg.qp, std::optional<Vector>(Vector::Ones(n)));

  ImportanceWeights w;
  w.beta = sol.beta;
  w.l_hat = l_hat_of(terms, w.beta);
  w.kkt_residual = sol.kkt_residual;
  w.mean_beta = w.beta.mean();
  w.B = cfg.B;
  w.epsilon = eps;
  w.band = cfg.include_band;
  w.iterations = sol.iterations;
  w.converged = sol.converged;
  return w;
}

double mean_discrepancy(const Matrix& train, const Matrix& test, const KernelSpec& kernel, const Vector& beta) {
  if (beta.size() != train.rows()) throw DimensionMismatch("mean_discrepancy: weight length mismatch");
  return l_hat_of(assemble(train, test, kernel), beta);
}

double mean_discrepancy_bound(double n_tr, double n_te, double B, double R, double delta) {
  if (!(n_tr > 0 && n_te > 0 && B > 0 && R > 0))
    throw std::invalid_argument("mean_discrepancy_bound: arguments must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("mean_discrepancy_bound: delta must lie in (0,1)");
  return std::sqrt(2.0 * std::log(2.0 / delta)) * R * std::sqrt(B * B / n_tr + 1.0 / n_te);
}

}  // namespace covshift
