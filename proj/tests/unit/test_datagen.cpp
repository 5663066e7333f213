#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "covshift/datagen.hpp"
#include "covshift/estimators.hpp"

using namespace covshift;

namespace {
const std::filesystem::path data_dir = COVSHIFT_TEST_DATA;
}

TEST_CASE("rng is reproducible and roughly standard") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(7);
  const Vector z = r.normal_vector(200000);
  CHECK(std::abs(z.mean()) < 4.0 / std::sqrt(200000.0));
  CHECK(std::abs((z.array() - z.mean()).square().mean() - 1.0) < 0.02);
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
}

TEST_CASE("toy population slope") {
  CHECK(toy_population_slope() == doctest::Approx(-0.73).epsilon(1e-12));
  // Large-sample noise-free slope under the test law.
  const ToyData d = gen_toy1d(10, 100000, 3, 0.0);
  const Vector x = d.test.X.col(0);
  const double slope = x.dot(d.test_labels) / x.squaredNorm();
  CHECK(std::abs(slope + 0.73) <= 0.02);
}

TEST_CASE("toy generator is deterministic with the stated marginals") {
  const ToyData a = gen_toy1d(10000, 50, 9), b = gen_toy1d(10000, 50, 9);
  CHECK(a.train.X == b.train.X);
  CHECK(*a.train.y == *b.train.y);
  CHECK(a.test_labels == b.test_labels);
  const Vector x = a.train.X.col(0);
  const double n = 10000.0;
  const double sd = std::sqrt((x.array() - x.mean()).square().sum() / (n - 1));
  CHECK(std::abs(x.mean() - 0.5) <= 4 * 0.5 / std::sqrt(n));
  CHECK(std::abs(sd - 0.5) <= 4 * 0.5 / std::sqrt(2 * n));
  CHECK_FALSE(a.test.has_labels());
  CHECK(gen_toy1d(10000, 50, 10).train.X != a.train.X);
}

TEST_CASE("unshifted toy variant reuses the training covariates") {
  const ToyData d = gen_toy1d(30, 30, 1, 0.0, false);
  CHECK(d.test.X == d.train.X);
  CHECK(d.test_labels == *d.train.y);
  CHECK_THROWS(gen_toy1d(30, 20, 1, 0.0, false));
}

TEST_CASE("gaussian spec sampling and density") {
  const auto g = gaussian_1d(1.0, 2.0);
  Vector x(1);
  x << 1.0;
  CHECK(g.log_pdf(x) == doctest::Approx(-std::log(2.0 * std::sqrt(2.0 * M_PI))));
  GaussianSpec bad;
  bad.mean = Vector::Zero(2);
  bad.covariance = Matrix::Zero(2, 2);
  CHECK_THROWS(bad.validate());
}

TEST_CASE("ten-dimensional generator") {
  const auto a = gen_gaussian10d(20, 30, 5, {}, 2000);
  const auto b = gen_gaussian10d(20, 30, 5, {}, 2000);
  CHECK(a.train.X == b.train.X);
  CHECK(a.nu_oracle == b.nu_oracle);
  CHECK(a.train.cols() == 10);
  CHECK(a.problem.p_te.covariance.isApprox(a.problem.p_te.covariance.transpose()));

  ShiftProblemParams flat;
  flat.c1_scale = 0.0;
  flat.c2_scale = 0.0;
  const auto c = gen_gaussian10d(5, 5, 1, flat, 1000);
  CHECK(c.nu_oracle == 0.5);

  // Two disjoint oracle streams agree to Monte Carlo accuracy.
  const ShiftProblem prob = draw_shift_problem({}, 77);
  Rng rng(1);
  const Vector gs = prob.g(prob.p_te.sample(rng, 20000));
  const double sd = std::sqrt((gs.array() - gs.mean()).square().mean());
  const double m = 1000000;
  CHECK(std::abs(oracle_mean(prob, 1000000, 1) - oracle_mean(prob, 1000000, 2)) <= 3 * sd / std::sqrt(m) * std::sqrt(2.0));
  (void)m;
}

TEST_CASE("identical distributions have unit density ratio") {
  const ShiftProblem prob = draw_shift_problem({}, 3);
  Rng rng(3);
  const Matrix X = prob.p_te.sample(rng, 10);
  CHECK((true_density_ratio(prob.p_te, prob.p_te, X).array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("biased subsampling") {
  const auto d = gen_gaussian10d(300, 10, 2, {}, 1000);
  CHECK(biased_subsample(d.train, 0.0, 1).rows() == 300);
  CHECK(biased_subsample_indices(d.train, 0.3, 4) == biased_subsample_indices(d.train, 0.3, 4));

  const Eigen::RowVectorXd xbar = d.train.X.colwise().mean();
  const Vector dist = (d.train.X.rowwise() - xbar).rowwise().norm();
  int wins = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto kept = biased_subsample_indices(d.train, 0.1, s);
    std::vector<bool> in(300, false);
    for (Index i : kept) in[static_cast<std::size_t>(i)] = true;
    double dk = 0, dr = 0;
    int nk = 0, nr = 0;
    for (Index i = 0; i < 300; ++i) (in[i] ? (dk += dist(i), ++nk) : (dr += dist(i), ++nr));
    if (nk && nr && dk / nk < dr / nr) ++wins;
  }
  CHECK(wins >= 95);
  CHECK_THROWS(biased_subsample(make_train(Matrix(0, 2), Vector(0)), 1.0, 1));
}

TEST_CASE("uci loader parses the fixture") {
  const UciData u = load_uci_breast_cancer(data_dir / "uci_original_5.csv");
  CHECK(u.data.rows() == 5);
  CHECK(u.data.cols() == 9);
  CHECK(u.dropped_rows == 0);
  CHECK(u.data.labels()(3) == 1.0);
  CHECK(u.data.labels()(0) == 0.0);
  for (Index j = 0; j < 9; ++j) {
    const Vector c = u.data.X.col(j);
    CHECK(std::abs(c.mean()) <= 1e-12);
    if (c.cwiseAbs().maxCoeff() > 0) CHECK(std::abs(c.squaredNorm() / 5.0 - 1.0) <= 1e-12);
  }
}

TEST_CASE("uci loader drops rows with missing values and skips a header") {
  const UciData u = load_uci_breast_cancer(data_dir / "uci_original_missing.csv");
  CHECK(u.dropped_rows == 2);
  CHECK(u.data.rows() == 4);
  CHECK(u.data.labels()(0) == 1.0);
}

TEST_CASE("uci diagnostic layout") {
  const UciData u = load_uci_breast_cancer(data_dir / "uci_diagnostic_3.csv", UciVariant::Diagnostic);
  CHECK(u.data.rows() == 3);
  CHECK(u.data.cols() == 30);
  CHECK(u.data.labels()(2) == 0.0);
}

TEST_CASE("uci loader rejects malformed files") {
  CHECK_THROWS(load_uci_breast_cancer(data_dir / "does_not_exist.csv"));
  const auto tmp = std::filesystem::temp_directory_path() / "covshift_bad_uci.csv";
  {
    std::ofstream out(tmp);
    out << "1,2,3\n";
  }
  CHECK_THROWS(load_uci_breast_cancer(tmp));
  std::filesystem::remove(tmp);
}

TEST_CASE("standardization") {
  Rng rng(1);
  Matrix X = rng.normal_matrix(100, 3) * 5.0;
  X.col(2).setConstant(4.0);
  standardize_columns(X);
  CHECK(std::abs(X.col(0).mean()) <= 1e-12);
  CHECK(std::abs(X.col(1).squaredNorm() / 100.0 - 1.0) <= 1e-12);
  CHECK(X.col(2).isZero(0.0));
}
