#include <doctest.h>

#include <cmath>

#include "covshift/datagen.hpp"
#include "covshift/qp.hpp"

using namespace covshift;

namespace {

BoxBandQp<double> box_qp(Matrix Q, Vector c, double lo, double hi) {
  BoxBandQp<double> p;
  const Index n = c.size();
  p.Q = std::move(Q);
  p.c = std::move(c);
  p.lower = Vector::Constant(n, lo);
  p.upper = Vector::Constant(n, hi);
  return p;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("interior minimizer") {
  const auto p = box_qp(Matrix::Identity(2, 2), vec({-1, -1}), 0, 2);
  const auto s = solve_qp(p);
  CHECK(s.converged);
  CHECK(s.beta(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.beta(1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("minimizer clipped to the box") {
  const auto s = solve_qp(box_qp(Matrix::Identity(2, 2), vec({-5, -5}), 0, 2));
  CHECK(s.converged);
  CHECK(s.beta(0) == doctest::Approx(2.0));
  CHECK(s.beta(1) == doctest::Approx(2.0));
}

TEST_CASE("coupled 2x2 problem agrees with the grid oracle") {
  Matrix Q(2, 2);
  Q << 1, 0.5, 0.5, 1;
  const auto p = box_qp(Q, vec({-1.5, -0.9}), 0, 2);
  const auto s = solve_qp(p);
  const Vector g = qp_bruteforce_oracle(p, 1e-3);
  CHECK(s.converged);
  CHECK(std::abs(s.beta(0) - g(0)) <= 2e-3);
  CHECK(std::abs(s.beta(1) - g(1)) <= 2e-3);
  // Unconstrained optimum is interior here: Q^{-1}(-c) = (1.4, 0.2).
  CHECK(s.beta(0) == doctest::Approx(1.4).epsilon(1e-6));
  CHECK(s.beta(1) == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("oracle edge cases") {
  auto p = box_qp(Matrix::Identity(2, 2), vec({1, -1}), 0, 1);
  p.lower = vec({0.3, 0.7});
  p.upper = vec({0.3, 0.7});
  const Vector g = qp_bruteforce_oracle(p, 0.1);
  CHECK(g(0) == 0.3);
  CHECK(g(1) == 0.7);

  // A band leaving only a sliver of the box.
  auto q = box_qp(Matrix::Identity(3, 3), vec({-1, 0.5, 0.2}), 0, 1);
  q.band = Band<double>{Vector::Ones(3), 2.9, 3.0};
  const Vector h = qp_bruteforce_oracle(q, 0.05);
  CHECK(h.sum() >= 2.9 - 1e-12);
  CHECK(h.sum() <= 3.0 + 1e-12);

  CHECK_THROWS(qp_bruteforce_oracle(box_qp(Matrix::Identity(5, 5), Vector::Zero(5), 0, 1), 0.1));
  CHECK_THROWS(qp_bruteforce_oracle(p, 0.0));
}

TEST_CASE("infeasible problems are rejected") {
  auto p = box_qp(Matrix::Identity(2, 2), vec({0, 0}), 0, 1);
  p.band = Band<double>{Vector::Ones(2), 3.0, 4.0};
  CHECK_THROWS_AS(solve_qp(p), InfeasibleProblem);
  p.band.reset();
  p.lower(0) = 2.0;
  CHECK_THROWS_AS(solve_qp(p), InfeasibleProblem);
  CHECK_THROWS_AS(solve_qp(box_qp(Matrix::Identity(3, 3), vec({0, 0}), 0, 1)), DimensionMismatch);
}

TEST_CASE("exact projection matches Dykstra and lands in the band") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const Index n = 2 + t % 6;
    BoxBandQp<double> p;
    p.Q = Matrix::Identity(n, n);
    p.c = Vector::Zero(n);
    p.lower = Vector::Zero(n);
    p.upper = Vector::Constant(n, 1.0 + rng.uniform() * 4.0);
    const double lo = 0.2 + 0.5 * rng.uniform();
    p.band = Band<double>{Vector::Constant(n, 1.0 / static_cast<double>(n)), lo, lo + 0.3 * rng.uniform()};
    const Vector v = 3.0 * rng.normal_vector(n);
    const Vector x = project_box_band(p, v);
    const double m = p.band->a.dot(x);
    CHECK(m >= p.band->lo - 1e-12);
    CHECK(m <= p.band->hi + 1e-12);
    CHECK((x.array() >= p.lower.array()).all());
    CHECK((x.array() <= p.upper.array()).all());
    const Vector d = dykstra_project(p, v, 100000, 1e-15);
    CHECK((x - d).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("objective trace never increases and KKT conditions hold") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const Index n = 10;
    const Matrix A = rng.normal_matrix(n, n);
    BoxBandQp<double> p;
    p.Q = A * A.transpose() / static_cast<double>(n);
    p.c = rng.normal_vector(n);
    p.lower = Vector::Zero(n);
    p.upper = Vector::Constant(n, 2.0);
    if (t % 2) p.band = Band<double>{Vector::Constant(n, 0.1), 0.5, 1.5};
    QpOptions<double> opts;
    opts.record_trace = true;
    const auto s = solve_qp(p, opts);
    CHECK(s.converged);
    CHECK(s.kkt_residual <= opts.tol);
    for (std::size_t i = 1; i < s.trace.size(); ++i) CHECK(s.trace[i] <= s.trace[i - 1]);
    if (!p.band) {
      const Vector g = p.gradient(s.beta);
      for (Index i = 0; i < n; ++i) {
        if (s.beta(i) <= p.lower(i))
          CHECK(g(i) >= -1e-6);
        else if (s.beta(i) >= p.upper(i))
          CHECK(g(i) <= 1e-6);
        else
          CHECK(std::abs(g(i)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("argmin is invariant to positive scaling of the objective") {
  Rng rng(4);
  const Index n = 6;
  const Matrix A = rng.normal_matrix(n, n);
  BoxBandQp<double> p;
  p.Q = A * A.transpose() + 0.5 * Matrix::Identity(n, n);
  p.c = rng.normal_vector(n);
  p.lower = Vector::Zero(n);
  p.upper = Vector::Ones(n);
  p.band = Band<double>{Vector::Constant(n, 1.0 / n), 0.3, 0.6};
  const auto s1 = solve_qp(p);
  for (double scale : {1e-3, 7.0, 250.0}) {
    auto q = p;
    q.Q *= scale;
    q.c *= scale;
    QpOptions<double> opts;
    opts.tol = 1e-7 * scale;
    const auto s2 = solve_qp(q, opts);
    CHECK((s1.beta - s2.beta).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("non-convergence is reported with the best iterate") {
  Rng rng(2);
  const Index n = 30;
  const Matrix A = rng.normal_matrix(n, n);
  BoxBandQp<double> p;
  p.Q = A * A.transpose();
  p.c = rng.normal_vector(n) * 10.0;
  p.lower = Vector::Zero(n);
  p.upper = Vector::Constant(n, 100.0);
  QpOptions<double> opts;
  opts.max_iter = 2;
  opts.tol = 1e-14;
  const auto s = solve_qp(p, opts);
  CHECK_FALSE(s.converged);
  CHECK((s.beta.array() >= 0.0).all());
  CHECK(s.objective <= p.objective(project_box_band(p, Vector(Vector::Zero(n)))));
}

TEST_CASE("solver is usable in long double") {
  using LD = long double;
  BoxBandQp<LD> p;
  p.Q = MatrixX<LD>::Identity(2, 2);
  p.c = VectorX<LD>::Constant(2, -1);
  p.lower = VectorX<LD>::Zero(2);
  p.upper = VectorX<LD>::Constant(2, 2);
  const auto s = solve_qp(p);
  CHECK(static_cast<double>(s.beta(0)) == doctest::Approx(1.0));
}
