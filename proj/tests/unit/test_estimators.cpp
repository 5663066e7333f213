#include <doctest.h>

#include <cmath>

#include "covshift/datagen.hpp"
#include "covshift/estimators.hpp"
#include "covshift/ridge.hpp"

using namespace covshift;

namespace {

RegressorFitter ridge_fitter(double gamma, KernelSpec k) {
  return [=](const Matrix& X, const Vector& y) { return fit_kernel_ridge(X, y, gamma, k).as_predictor(); };
}

RegressorFitter zero_fitter() {
  return [](const Matrix&, const Vector&) { return zero_predictor(); };
}

}  // namespace

TEST_CASE("v_kmm examples") {
  Vector y(2), b(2);
  y << 1, 0;
  b << 2, 0;
  CHECK(estimate_v_kmm(y, b) == 1.0);
  const Vector y3 = Vector::LinSpaced(5, 0, 4);
  CHECK(estimate_v_kmm(y3, Vector::Ones(5)) == doctest::Approx(2.0));
  CHECK(estimate_v_kmm(y3, Vector::Zero(5)) == 0.0);
  CHECK_THROWS_AS(estimate_v_kmm(y3, Vector::Ones(4)), DimensionMismatch);
}

TEST_CASE("v_nr examples") {
  Matrix X(2, 1);
  X << 0, 1;
  CHECK(estimate_v_nr(constant_predictor(0.3), X) == doctest::Approx(0.3));
  const Predictor identity = [](const Matrix& Z) -> Vector { return Z.col(0); };
  CHECK(estimate_v_nr(identity, X) == doctest::Approx(0.5));

  Matrix a(1, 1);
  a << 2.0;
  Vector y(1);
  y << 0.5;
  const auto m = fit_kernel_ridge(a, y, 1.0, KernelSpec::gaussian(1.0));
  CHECK(estimate_v_nr(m.as_predictor(), a) == doctest::Approx(0.25));
  CHECK_THROWS(estimate_v_nr(identity, Matrix(0, 1)));
}

TEST_CASE("zero regressor reproduces v_kmm bit for bit") {
  for (bool reuse : {true, false}) {
    const auto d = gen_gaussian10d(40, 60, 5, {}, 1000);
    const SplitPlan plan = make_split_plan(40, 0.5, reuse);
    KmmConfig cfg;
    cfg.kernel = KernelSpec::gaussian(0.3);
    const auto r = estimate_v_r(d.train, d.test, plan, cfg, zero_fitter());
    CHECK(r.v_r == r.v_kmm);
    CHECK(r.v_r == r.residual_term + r.plugin_term);
    CHECK(r.weights.has_value());
    CHECK(r.n_kmm == (reuse ? 40 : 20));
  }
}

TEST_CASE("decomposition holds exactly with a fitted regressor") {
  const auto d = gen_gaussian10d(50, 80, 6, {}, 1000);
  KmmConfig cfg;
  cfg.kernel = KernelSpec::gaussian(0.3);
  const auto r = estimate_v_r(d.train, d.test, make_split_plan(50, 0.4, false), cfg,
                              ridge_fitter(0.02, KernelSpec::gaussian(0.3)));
  CHECK(r.v_r == r.residual_term + r.plugin_term);
  CHECK(r.v_nr == r.plugin_term);
  CHECK(r.n_kmm == 20);
  CHECK(r.n_nr == 30);
}

TEST_CASE("exact regressor on noise-free labels leaves no residual") {
  ShiftProblemParams params;
  params.noise_sd = 0.0;
  const ShiftProblem prob = draw_shift_problem(params, 3);
  const ShiftSample s = sample_shift_problem(prob, 30, 40, 4);
  const RegressorFitter exact = [&](const Matrix&, const Vector&) -> Predictor {
    return [&](const Matrix& X) { return prob.g(X); };
  };
  const auto r = estimate_v_r_with_weights(s.train, s.test, make_split_plan(30, 1.0, true), Vector::Ones(30), exact);
  CHECK(std::abs(r.residual_term) <= 1e-15);
  CHECK(r.v_r == doctest::Approx(prob.g(s.test.X).mean()));
}

TEST_CASE("split plans") {
  const auto p = make_split_plan(10, 0.35, false);
  CHECK(p.kmm_indices.size() == 3);
  CHECK(p.nr_indices.size() == 7);
  CHECK(p.kmm_indices.front() == 0);
  CHECK(p.nr_indices.front() == 3);
  CHECK_NOTHROW(make_split_plan(10, 1.0, true));
  CHECK_THROWS(make_split_plan(10, 1.0, false));
  CHECK_THROWS(make_split_plan(10, 0.0, false));
  CHECK_THROWS(make_split_plan(10, 0.05, false));
  CHECK_THROWS(make_split_plan(10, 1.5, true));
  CHECK(make_split_plan(10, 0.3, true).kmm_indices.size() == 10);
}

TEST_CASE("regressor only sees the regression rows in split mode") {
  const auto d = gen_gaussian10d(20, 20, 8, {}, 1000);
  Index seen = -1;
  const RegressorFitter spy = [&](const Matrix& X, const Vector&) {
    seen = X.rows();
    CHECK((X - d.train.X.bottomRows(X.rows())).norm() == 0.0);
    return zero_predictor();
  };
  estimate_v_r_with_weights(d.train, d.test, make_split_plan(20, 0.25, false), Vector::Ones(5), spy);
  CHECK(seen == 15);
}

TEST_CASE("estimator input checks") {
  const auto d = gen_gaussian10d(10, 10, 9, {}, 1000);
  const auto plan = make_split_plan(10, 0.5, false);
  CHECK_THROWS_AS(estimate_v_r_with_weights(d.train, d.test, plan, Vector::Ones(4), zero_fitter()), DimensionMismatch);
  Dataset unlabeled = d.train;
  unlabeled.y.reset();
  CHECK_THROWS(estimate_v_r_with_weights(unlabeled, d.test, plan, Vector::Ones(5), zero_fitter()));
  Dataset bad_test = d.test;
  bad_test.y = Vector::Zero(10);
  CHECK_THROWS(estimate_v_r_with_weights(d.train, bad_test, plan, Vector::Ones(5), zero_fitter()));
}

TEST_CASE("density ratio of gaussian pairs") {
  const auto tr = gaussian_1d(0.5, 0.5), te = gaussian_1d(0.0, 0.3);
  Vector x0(1);
  x0 << 0.0;
  CHECK(true_density_ratio(tr, te, x0) == doctest::Approx(5.0 / 3.0 * std::exp(0.5)).epsilon(1e-12));
  CHECK(true_density_ratio(tr, te, x0) == doctest::Approx(2.74787).epsilon(1e-5));
  CHECK(true_density_ratio(tr, tr, x0) == doctest::Approx(1.0));

  // Where the two densities cross the ratio is one: bisection on the log ratio
  // between the test mode and a point far in the training tail.
  auto logr = [&](double x) {
    Vector v(1);
    v << x;
    return te.log_pdf(v) - tr.log_pdf(v);
  };
  double lo = 0.0, hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (logr(mid) > 0 ? lo : hi) = mid;
  }
  Vector xc(1);
  xc << 0.5 * (lo + hi);
  CHECK(std::abs(true_density_ratio(tr, te, xc) - 1.0) <= 1e-9);

  Rng rng(1);
  const Matrix X = tr.sample(rng, 5);
  const Vector r = true_density_ratio(tr, te, X);
  for (Index i = 0; i < 5; ++i)
    CHECK(r(i) == doctest::Approx(true_density_ratio(tr, te, Vector(X.row(i).transpose()))).epsilon(1e-12));
}

TEST_CASE("density ratio averages to one under the training law") {
  ShiftProblemParams params;
  params.dim = 3;
  params.dominating_train_cov = true;
  const auto prob = draw_shift_problem(params, 10);
  Rng rng(2);
  const Vector r = true_density_ratio(prob.p_tr, prob.p_te, prob.p_tr.sample(rng, 200000));
  const double se = std::sqrt((r.array() - r.mean()).square().sum() / (r.size() - 1.0) / r.size());
  CHECK(std::abs(r.mean() - 1.0) <= 3.0 * se);
}
