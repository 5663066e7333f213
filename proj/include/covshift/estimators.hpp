#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "covshift/datagen.hpp"
#include "covshift/kmm.hpp"
#include "covshift/types.hpp"

namespace covshift {

/// Partition of the training rows into the part that receives importance
/// weights and the part that trains the regression function. In reuse mode
/// both parts are the full training set and rho is ignored.
struct SplitPlan {
  double rho = 0.5;
  std::vector<Index> kmm_indices;
  std::vector<Index> nr_indices;
  bool reuse_full = true;
};

/// Split mode takes the first floor(rho n_tr) rows for weighting and the rest
/// for regression; either part being empty is an error.
SplitPlan make_split_plan(Index n_tr, double rho, bool reuse_full);

/// Fits a regression function on (X, y).
using RegressorFitter = std::function<Predictor(const Matrix&, const Vector&)>;

struct EstimateReport {
  double v_kmm = 0.0;
  double v_nr = 0.0;
  double v_r = 0.0;
  double residual_term = 0.0;
  double plugin_term = 0.0;
  std::optional<ImportanceWeights> weights;  // absent when weights were supplied
  std::optional<double> gamma;
  Index n_kmm = 0;
  Index n_nr = 0;
  Index n_te = 0;
};

/// (1/n) sum_j beta_j y_j -- divides by the row count, not by sum(beta).
double estimate_v_kmm(const Vector& y, const Vector& beta);
inline double estimate_v_kmm(const Dataset& train, const ImportanceWeights& w) {
  return estimate_v_kmm(train.labels(), w.beta);
}

/// Mean of g over the test covariates.
double estimate_v_nr(const Predictor& g, const Matrix& test);

struct RobustTerms {
  double residual_term = 0.0;
  double plugin_term = 0.0;
  double v_r = 0.0;
};

/// (1/k) sum_j beta_j (y_j - g(x_j)) + (1/n_te) sum_i g(x_i^te), with g
/// already evaluated on both sets.
RobustTerms robust_combination(const Vector& beta, const Vector& y, const Vector& g_train, const Vector& g_test);

/// Full pipeline: KMM weights on the weighting rows against the test set, the
/// regression fitted on the regression rows only, then the robust estimate.
EstimateReport estimate_v_r(const Dataset& train, const Dataset& test, const SplitPlan& plan, const KmmConfig& cfg,
                            const RegressorFitter& fit_g);

/// As estimate_v_r with weights for the weighting rows supplied by the caller
/// (e.g. the true density ratio).
EstimateReport estimate_v_r_with_weights(const Dataset& train, const Dataset& test, const SplitPlan& plan,
                                         const Vector& beta_kmm, const RegressorFitter& fit_g);

/// dP_te/dP_tr at x for a Gaussian pair.
double true_density_ratio(const GaussianSpec& p_tr, const GaussianSpec& p_te, const Vector& x);
Vector true_density_ratio(const GaussianSpec& p_tr, const GaussianSpec& p_te, const Matrix& X);

}  // namespace covshift
