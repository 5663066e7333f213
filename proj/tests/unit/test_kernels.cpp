#include <doctest.h>

#include <cmath>

#include "covshift/datagen.hpp"
#include "covshift/kernels.hpp"

using namespace covshift;

TEST_CASE("gram of a single point under the gaussian family is one") {
  Matrix X(1, 3);
  X << 0.2, -1.0, 4.0;
  const Matrix K = gram(KernelSpec::gaussian(std::sqrt(5.0)), X);
  CHECK(K.rows() == 1);
  CHECK(K(0, 0) == 1.0);
}

TEST_CASE("polynomial gram of orthogonal vectors") {
  Matrix X(2, 2);
  X << 1, 0, 0, 1;
  const Matrix K = gram(KernelSpec::polynomial(3), X);
  CHECK(K(0, 1) == doctest::Approx(1.0));
  CHECK(K(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("gaussian family uses the unsquared distance") {
  Matrix a(1, 1), b(1, 1);
  a << 0.0;
  b << 3.0;
  const Matrix K = cross_gram(KernelSpec::gaussian(1.0), a, b);
  CHECK(K(0, 0) == doctest::Approx(std::exp(-3.0)).epsilon(1e-14));
  CHECK(K(0, 0) == doctest::Approx(0.049787).epsilon(1e-5));
}

TEST_CASE("cross_gram values and errors") {
  Matrix A(1, 2), B(1, 2);
  A << 1, 1;
  B << 1, 0;
  CHECK(cross_gram(KernelSpec::polynomial(3, 1.0), A, B)(0, 0) == doctest::Approx(8.0));
  CHECK(cross_gram(KernelSpec::gaussian(2.0), A, A)(0, 0) == 1.0);

  Rng rng(3);
  const Matrix X = rng.normal_matrix(6, 3);
  const auto spec = KernelSpec::gaussian(0.7);
  CHECK((cross_gram(spec, X, X) - gram(spec, X)).cwiseAbs().maxCoeff() == 0.0);

  const Matrix C = rng.normal_matrix(2, 4);
  CHECK_THROWS_AS(cross_gram(spec, X, C), DimensionMismatch);
}

TEST_CASE("gram rejects empty and non-finite input") {
  CHECK_THROWS(gram(KernelSpec::gaussian(1.0), Matrix(0, 2)));
  Matrix X(2, 1);
  X << 1.0, std::nan("");
  CHECK_THROWS(gram(KernelSpec::gaussian(1.0), X));
}

TEST_CASE("kernel spec validation") {
  CHECK_THROWS(KernelSpec::gaussian(0.0));
  CHECK_THROWS(KernelSpec::gaussian(-1.0));
  CHECK_THROWS(KernelSpec::polynomial(0));
  CHECK_THROWS(KernelSpec::polynomial(2, -1.0));
  CHECK(kernel_family_from_string("polynomial") == KernelFamily::Polynomial);
  CHECK_THROWS(kernel_family_from_string("rbf"));
}

TEST_CASE("gram is exactly symmetric and numerically PSD on random data") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 5 + 2 * trial;
    const Matrix X = rng.normal_matrix(n, 3);
    for (const auto& spec : {KernelSpec::gaussian(0.5 + trial * 0.1), KernelSpec::polynomial(3, 1.0)}) {
      const Matrix K = gram(spec, X);
      CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
      const Eigen::SelfAdjointEigenSolver<Matrix> es(K);
      CHECK(es.eigenvalues().minCoeff() >= -1e-8 * static_cast<double>(n) * std::max(1.0, K.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("kernel values are bounded by the feature bound") {
  Rng rng(5);
  const Matrix X = rng.normal_matrix(30, 2);
  const Matrix Kg = gram(KernelSpec::gaussian(1.3), X);
  CHECK(Kg.minCoeff() >= 0.0);
  CHECK(Kg.maxCoeff() <= 1.0);
  CHECK(Kg.diagonal().isOnes(0.0));
  CHECK(feature_bound(KernelSpec::gaussian(1.3), X) == 1.0);

  const auto poly = KernelSpec::polynomial(3, 1.0);
  const Matrix Kp = gram(poly, X);
  const double R = feature_bound(poly, X);
  CHECK(R == doctest::Approx(std::sqrt(Kp.diagonal().maxCoeff())));
  CHECK(Kp.cwiseAbs().maxCoeff() <= R * R * (1 + 1e-12));
}

TEST_CASE("kernels work in single precision") {
  Eigen::MatrixXf X(2, 1);
  X << 0.0f, 1.0f;
  const Eigen::MatrixXf K = gram(KernelSpec::gaussian(1.0), X);
  CHECK(K(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
}
