#include <doctest.h>

#include <cmath>

#include "covshift/datagen.hpp"
#include "covshift/kmm.hpp"

using namespace covshift;

namespace {

void check_invariants(const ImportanceWeights& w, const KmmConfig& cfg) {
  CHECK(w.beta.minCoeff() >= 0.0);
  CHECK(w.beta.maxCoeff() <= cfg.B);
  CHECK(w.l_hat >= 0.0);
  CHECK(w.mean_beta == doctest::Approx(w.beta.mean()));
  if (cfg.include_band) CHECK(std::abs(w.mean_beta - 1.0) <= w.epsilon + 1e-9);
}

}  // namespace

TEST_CASE("identical train and test sets give uniform weights") {
  Rng rng(1);
  const Matrix X = rng.normal_matrix(40, 2);
  KmmConfig cfg;
  cfg.epsilon = 0.0;
  const auto w = kmm_weights(X, X, cfg);
  check_invariants(w, cfg);
  CHECK(w.l_hat <= 1e-8);
  CHECK((w.beta.array() - 1.0).abs().maxCoeff() <= 1e-4);
}

TEST_CASE("single shared point") {
  Matrix X(1, 1);
  X << 0.4;
  KmmConfig cfg;
  const auto w = kmm_weights(X, X, cfg);
  CHECK(w.beta(0) == doctest::Approx(1.0));
  CHECK(w.l_hat == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("weighted training mean moves toward the test mean") {
  int closer = 0;
  const int runs = 20;
  for (int s = 0; s < runs; ++s) {
    const ToyData d = gen_toy1d(200, 200, 100 + s);
    KmmConfig cfg;
    cfg.kernel = KernelSpec::gaussian(1.0);
    const auto w = kmm_weights(d.train, d.test, cfg);
    check_invariants(w, cfg);
    const Vector x = d.train.X.col(0);
    const double weighted = w.beta.dot(x) / w.beta.sum();
    const double target = d.test.X.col(0).mean();
    closer += std::abs(weighted - target) < std::abs(x.mean() - target);
  }
  CHECK(closer >= 19);
}

TEST_CASE("solver never loses to the uniform weighting") {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const Matrix tr = rng.normal_matrix(30, 3);
    const Matrix te = rng.normal_matrix(25, 3).array() + 0.5;
    KmmConfig cfg;
    cfg.kernel = KernelSpec::gaussian(0.8);
    const auto w = kmm_weights(tr, te, cfg);
    check_invariants(w, cfg);
    CHECK(w.l_hat <= mean_discrepancy(tr, te, cfg.kernel, Vector::Ones(30)) + 1e-10);
    CHECK(w.l_hat == doctest::Approx(mean_discrepancy(tr, te, cfg.kernel, w.beta)).epsilon(1e-9));
  }
}

TEST_CASE("l_hat equals the squared distance between embedded means") {
  Rng rng(9);
  const Matrix tr = rng.normal_matrix(7, 2), te = rng.normal_matrix(5, 2);
  const auto k = KernelSpec::gaussian(1.1);
  const Vector beta = rng.normal_vector(7).cwiseAbs();
  // || (1/n) sum beta_j phi(x_j) - (1/m) sum phi(z_i) ||^2 via the stacked Gram.
  Matrix Z(12, 2);
  Z << tr, te;
  Vector c(12);
  c << beta / 7.0, Vector::Constant(5, -1.0 / 5.0);
  const double direct = c.dot(gram(k, Z) * c);
  CHECK(mean_discrepancy(tr, te, k, beta) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("tighter weight bound cannot improve the discrepancy") {
  Rng rng(12);
  const Matrix tr = rng.normal_matrix(40, 2);
  const Matrix te = (rng.normal_matrix(40, 2) * 0.5).array() + 0.7;
  double prev = -1.0;
  for (double B : {1000.0, 10.0, 1.0}) {
    KmmConfig cfg;
    cfg.B = B;
    cfg.qp.tol = 1e-9;
    const auto w = kmm_weights(tr, te, cfg);
    check_invariants(w, cfg);
    CHECK(w.l_hat >= prev - 1e-7);
    prev = w.l_hat;
  }
}

TEST_CASE("band can be switched off") {
  Rng rng(3);
  const Matrix tr = rng.normal_matrix(20, 1);
  const Matrix te = rng.normal_matrix(20, 1).array() + 2.0;
  KmmConfig cfg;
  cfg.include_band = false;
  const auto w = kmm_weights(tr, te, cfg);
  CHECK_FALSE(w.band);
  CHECK(w.beta.minCoeff() >= 0.0);
}

TEST_CASE("kmm input errors") {
  KmmConfig cfg;
  CHECK_THROWS_AS(kmm_weights(Matrix::Ones(3, 2), Matrix::Ones(3, 1), cfg), DimensionMismatch);
  CHECK_THROWS(kmm_weights(Matrix(0, 2), Matrix::Ones(3, 2), cfg));
  CHECK_THROWS(kmm_weights(Matrix::Ones(3, 2), Matrix(0, 2), cfg));
  cfg.B = 0.0;
  CHECK_THROWS(kmm_weights(Matrix::Ones(3, 2), Matrix::Ones(3, 2), cfg));
  cfg.B = 1.0;
  cfg.epsilon = -0.1;
  CHECK_THROWS(kmm_weights(Matrix::Ones(3, 2), Matrix::Ones(3, 2), cfg));
}

TEST_CASE("default band width") {
  CHECK(default_epsilon(100) == doctest::Approx(0.9));
  CHECK(default_epsilon(1) == 0.0);
}

TEST_CASE("mean discrepancy bound") {
  const double delta = 2.0 / std::exp(2.0);
  CHECK(mean_discrepancy_bound(2, 2, 1, 1, delta) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(mean_discrepancy_bound(1e6, 1e6, 1, 1, 0.05) < 0.01);
  CHECK(mean_discrepancy_bound(4, 1e300, 2, 1, delta) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS(mean_discrepancy_bound(0, 1, 1, 1, 0.5));
  CHECK_THROWS(mean_discrepancy_bound(1, 1, 1, 1, 1.0));
  CHECK_THROWS(mean_discrepancy_bound(1, 1, -1, 1, 0.5));
}
