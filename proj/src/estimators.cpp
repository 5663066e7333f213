#include "covshift/estimators.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace covshift {

SplitPlan make_split_plan(Index n_tr, double rho, bool reuse_full) {
  if (n_tr < 1) throw std::invalid_argument("split plan: n_tr must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("split plan: rho must lie in [0,1]");
  SplitPlan plan;
  plan.rho = rho;
  plan.reuse_full = reuse_full;
  std::vector<Index> all(static_cast<std::size_t>(n_tr));
  std::iota(all.begin(), all.end(), Index{0});
  if (reuse_full) {
    plan.kmm_indices = all;
    plan.nr_indices = all;
    return plan;
  }
  const auto k = static_cast<Index>(std::floor(rho * static_cast<double>(n_tr)));
  if (k == 0) throw std::invalid_argument("split plan: rho leaves no rows for the weighted residual term");
  if (k == n_tr) throw std::invalid_argument("split plan: rho leaves no rows for the regression fit");
  plan.kmm_indices.assign(all.begin(), all.begin() + k);
  plan.nr_indices.assign(all.begin() + k, all.end());
  return plan;
}

double estimate_v_kmm(const Vector& y, const Vector& beta) {
  if (y.size() != beta.size()) throw DimensionMismatch("v_kmm: weight length does not match labels");
  if (y.size() == 0) throw std::invalid_argument("v_kmm: empty training set");
  return (beta.array() * y.array()).sum() / static_cast<double>(y.size());
}

double estimate_v_nr(const Predictor& g, const Matrix& test) {
  if (test.rows() == 0) throw std::invalid_argument("v_nr: empty test set");
  return g(test).mean();
}

RobustTerms robust_combination(const Vector& beta, const Vector& y, const Vector& g_train, const Vector& g_test) {
  if (beta.size() != y.size() || g_train.size() != y.size())
    throw DimensionMismatch("robust estimate: training vectors differ in length");
  if (y.size() == 0 || g_test.size() == 0) throw std::invalid_argument("robust estimate: empty input");
  const Vector residual = y - g_train;
  RobustTerms t;
  t.residual_term = (beta.array() * residual.array()).sum() / static_cast<double>(y.size());
  t.plugin_term = g_test.mean();
  t.v_r = t.residual_term + t.plugin_term;
  return t;
}

namespace {

EstimateReport combine(const Dataset& train, const Dataset& test, const SplitPlan& plan, const Vector& beta,
                       const RegressorFitter& fit_g) {
  const Dataset kmm_part = subset_rows(train, plan.kmm_indices);
  const Dataset nr_part = subset_rows(train, plan.nr_indices);
  const Predictor g = fit_g(nr_part.X, nr_part.labels());
  const RobustTerms t = robust_combination(beta, kmm_part.labels(), g(kmm_part.X), g(test.X));
  EstimateReport r;
  r.v_kmm = estimate_v_kmm(kmm_part.labels(), beta);
  r.v_nr = t.plugin_term;
  r.v_r = t.v_r;
  r.residual_term = t.residual_term;
  r.plugin_term = t.plugin_term;
  r.n_kmm = kmm_part.rows();
  r.n_nr = nr_part.rows();
  r.n_te = test.rows();
  return r;
}

void check_inputs(const Dataset& train, const Dataset& test, const SplitPlan& plan) {
  validate(train);
  validate(test);
  if (!train.has_labels()) throw std::invalid_argument("robust estimate: training labels required");
  if (train.cols() != test.cols()) throw DimensionMismatch("robust estimate: train/test column counts differ");
  if (test.rows() == 0) throw std::invalid_argument("robust estimate: empty test set");
  if (plan.kmm_indices.empty() || plan.nr_indices.empty()) throw std::invalid_argument("robust estimate: empty split");
  for (const auto* idx : {&plan.kmm_indices, &plan.nr_indices})
    for (const Index i : *idx)
      if (i < 0 || i >= train.rows()) throw std::out_of_range("robust estimate: split index out of range");
}

}  // namespace

EstimateReport estimate_v_r(const Dataset& train, const Dataset& test, const SplitPlan& plan, const KmmConfig& cfg,
                            const RegressorFitter& fit_g) {
  check_inputs(train, test, plan);
  const Dataset kmm_part = subset_rows(train, plan.kmm_indices);
  ImportanceWeights w = kmm_weights(kmm_part.X, test.X, cfg);
  EstimateReport r = combine(train, test, plan, w.beta, fit_g);
  r.weights = std::move(w);
  return r;
}

EstimateReport estimate_v_r_with_weights(const Dataset& train, const Dataset& test, const SplitPlan& plan,
                                         const Vector& beta_kmm, const RegressorFitter& fit_g) {
  check_inputs(train, test, plan);
  if (beta_kmm.size() != static_cast<Index>(plan.kmm_indices.size()))
    throw DimensionMismatch("robust estimate: weight length does not match the weighting rows");
  return combine(train, test, plan, beta_kmm, fit_g);
}

double true_density_ratio(const GaussianSpec& p_tr, const GaussianSpec& p_te, const Vector& x) {
  return std::exp(p_te.log_pdf(x) - p_tr.log_pdf(x));
}

Vector true_density_ratio(const GaussianSpec& p_tr, const GaussianSpec& p_te, const Matrix& X) {
  return (p_te.log_pdf(X) - p_tr.log_pdf(X)).array().exp();
}

}  // namespace covshift
