#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covshift/types.hpp"

namespace covshift {

class InfeasibleProblem : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// lo <= a^T beta <= hi
template <typename Scalar>
struct Band {
  VectorX<Scalar> a;
  Scalar lo;
  Scalar hi;
};

/// minimize 1/2 b^T Q b + c^T b  subject to  lower <= b <= upper  and an
/// optional linear band.
template <typename Scalar>
struct BoxBandQp {
  MatrixX<Scalar> Q;
  VectorX<Scalar> c;
  VectorX<Scalar> lower;
  VectorX<Scalar> upper;
  std::optional<Band<Scalar>> band;

  Index size() const { return c.size(); }

  Scalar objective(const VectorX<Scalar>& b) const { return Scalar(0.5) * b.dot(Q * b) + c.dot(b); }
  VectorX<Scalar> gradient(const VectorX<Scalar>& b) const { return Q * b + c; }

  /// Range of a^T b over the box.
  std::pair<Scalar, Scalar> band_range() const {
    const auto& a = band->a;
    Scalar mn(0), mx(0);
    for (Index i = 0; i < size(); ++i) {
      const Scalar p = a(i) * lower(i), q = a(i) * upper(i);
      mn += std::min(p, q);
      mx += std::max(p, q);
    }
    return {mn, mx};
  }

  void validate() const {
    const Index n = size();
    if (n == 0) throw std::invalid_argument("qp: empty problem");
    if (Q.rows() != n || Q.cols() != n || lower.size() != n || upper.size() != n)
      throw DimensionMismatch("qp: inconsistent dimensions");
    if (!Q.allFinite() || !c.allFinite()) throw std::invalid_argument("qp: non-finite data");
    if ((lower.array() > upper.array()).any()) throw InfeasibleProblem("qp: lower bound exceeds upper bound");
    if (band) {
      if (band->a.size() != n) throw DimensionMismatch("qp: band vector has wrong length");
      if (band->lo > band->hi) throw InfeasibleProblem("qp: band lo exceeds hi");
      const auto [mn, mx] = band_range();
      const Scalar slack = Scalar(1e-12) * (Scalar(1) + std::abs(mn) + std::abs(mx));
      if (mx < band->lo - slack || mn > band->hi + slack)
        throw InfeasibleProblem("qp: band does not intersect the box");
    }
  }
};

template <typename Scalar>
struct QpOptions {
  Scalar tol = Scalar(1e-7);
  int max_iter = 50000;
  bool record_trace = false;
};

template <typename Scalar>
struct QpSolution {
  VectorX<Scalar> beta;
  Scalar objective = Scalar(0);
  Scalar kkt_residual = Scalar(0);
  int iterations = 0;
  bool converged = false;
  std::vector<Scalar> trace;
};

/// Euclidean projection onto box ∩ band.
///
/// The band multiplier mu solves a^T clamp(v - mu a) = target; the left side
/// is piecewise linear and non-increasing in mu, so the root is located by
/// binary search over the sorted breakpoints and then interpolated exactly.
template <typename Scalar>
VectorX<Scalar> project_box_band(const BoxBandQp<Scalar>& p, const VectorX<Scalar>& v) {
  VectorX<Scalar> x = v.cwiseMax(p.lower).cwiseMin(p.upper);
  if (!p.band) return x;
  const auto& a = p.band->a;
  const Scalar s = a.dot(x);
  if (s >= p.band->lo && s <= p.band->hi) return x;
  const Scalar target = s > p.band->hi ? p.band->hi : p.band->lo;

  auto clamp_at = [&](Scalar mu) -> VectorX<Scalar> { return (v - mu * a).cwiseMax(p.lower).cwiseMin(p.upper); };
  auto phi = [&](Scalar mu) { return a.dot(clamp_at(mu)); };

  std::vector<Scalar> bps;
  bps.reserve(static_cast<std::size_t>(2 * v.size() + 1));
  bps.push_back(Scalar(0));
  for (Index i = 0; i < v.size(); ++i) {
    if (a(i) == Scalar(0)) continue;
    bps.push_back((v(i) - p.lower(i)) / a(i));
    bps.push_back((v(i) - p.upper(i)) / a(i));
  }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

  // phi is constant beyond the outermost breakpoints.
  if (target >= phi(bps.front())) return clamp_at(bps.front());
  if (target <= phi(bps.back())) return clamp_at(bps.back());

  std::size_t lo = 0, hi = bps.size() - 1;  // phi(bps[lo]) > target > phi(bps[hi])
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    const Scalar f = phi(bps[mid]);
    if (f == target) return clamp_at(bps[mid]);
    if (f > target)
      lo = mid;
    else
      hi = mid;
  }
  const Scalar m0 = bps[lo], m1 = bps[hi];
  const Scalar f0 = phi(m0), f1 = phi(m1);
  const Scalar mu = f0 == f1 ? m0 : m0 + (target - f0) * (m1 - m0) / (f1 - f0);
  return clamp_at(mu);
}

/// Dykstra's alternating projection between the box and the band slab.
template <typename Scalar>
VectorX<Scalar> dykstra_project(const BoxBandQp<Scalar>& p, const VectorX<Scalar>& v, int max_iter = 100,
                                Scalar exit_tol = Scalar(1e-12)) {
  if (!p.band) return v.cwiseMax(p.lower).cwiseMin(p.upper);
  const auto& a = p.band->a;
  const Scalar aa = a.squaredNorm();
  auto slab = [&](const VectorX<Scalar>& u) -> VectorX<Scalar> {
    const Scalar s = a.dot(u);
    if (aa == Scalar(0) || (s >= p.band->lo && s <= p.band->hi)) return u;
    const Scalar t = s > p.band->hi ? p.band->hi : p.band->lo;
    return u - ((s - t) / aa) * a;
  };
  VectorX<Scalar> x = v;
  VectorX<Scalar> y = v;
  VectorX<Scalar> pc = VectorX<Scalar>::Zero(v.size());
  VectorX<Scalar> qc = VectorX<Scalar>::Zero(v.size());
  for (int k = 0; k < max_iter; ++k) {
    const VectorX<Scalar> yn = (x + pc).cwiseMax(p.lower).cwiseMin(p.upper);
    pc = x + pc - yn;
    const VectorX<Scalar> xn = slab(yn + qc);
    qc = yn + qc - xn;
    // Stop once both iterates have settled and agree.
    const Scalar step = (xn - x).norm() + (yn - y).norm() + (xn - yn).norm();
    x = xn;
    y = yn;
    if (step < exit_tol) break;
  }
  return x;
}

/// Norm (infinity) of the unit-step projected-gradient map, zero exactly at
/// KKT points.
template <typename Scalar>
Scalar kkt_residual(const BoxBandQp<Scalar>& p, const VectorX<Scalar>& b, const VectorX<Scalar>& grad) {
  return (b - project_box_band(p, VectorX<Scalar>(b - grad))).cwiseAbs().maxCoeff();
}

namespace detail {

template <typename Scalar>
Scalar largest_eigenvalue_estimate(const MatrixX<Scalar>& Q) {
  const Index n = Q.rows();
  VectorX<Scalar> v(n);
  for (Index i = 0; i < n; ++i) v(i) = Scalar(1) + Scalar(i) / Scalar(n);
  v.normalize();
  Scalar lambda(0);
  for (int k = 0; k < 50; ++k) {
    VectorX<Scalar> w = Q * v;
    const Scalar nw = w.norm();
    if (nw == Scalar(0)) return Scalar(0);
    lambda = v.dot(w);
    v = w / nw;
  }
  return lambda;
}

}  // namespace detail

/// Accelerated projected gradient with backtracking and function-value
/// restart. The recorded objective trace never increases.
template <typename Scalar>
QpSolution<Scalar> solve_qp(const BoxBandQp<Scalar>& p, const QpOptions<Scalar>& opts = {},
                            const std::optional<VectorX<Scalar>>& start = std::nullopt) {
  if (!(opts.tol > Scalar(0))) throw std::invalid_argument("solve_qp: tol must be positive");
  p.validate();
  const Index n = p.size();
  if (start && start->size() != n) throw DimensionMismatch("solve_qp: start vector has wrong length");

  auto f_of = [&](const VectorX<Scalar>& b, const VectorX<Scalar>& Qb) {
    return Scalar(0.5) * b.dot(Qb) + p.c.dot(b);
  };

  QpSolution<Scalar> sol;
  VectorX<Scalar> x = project_box_band(p, start ? *start : VectorX<Scalar>(VectorX<Scalar>::Zero(n)));
  VectorX<Scalar> Qx = p.Q * x;
  Scalar fx = f_of(x, Qx);
  VectorX<Scalar> y = x, Qy = Qx;
  Scalar t(1);
  Scalar L = std::max(detail::largest_eigenvalue_estimate(p.Q), std::numeric_limits<Scalar>::epsilon());
  bool restarted = true;
  if (opts.record_trace) sol.trace.push_back(fx);

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    sol.kkt_residual = kkt_residual(p, x, VectorX<Scalar>(Qx + p.c));
    if (sol.kkt_residual <= opts.tol) {
      sol.converged = true;
      break;
    }
    const VectorX<Scalar> gy = Qy + p.c;
    const Scalar fy = f_of(y, Qy);
    VectorX<Scalar> z, Qz;
    Scalar fz;
    for (;;) {
      z = project_box_band(p, VectorX<Scalar>(y - gy / L));
      Qz = p.Q * z;
      fz = f_of(z, Qz);
      const VectorX<Scalar> d = z - y;
      const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + std::abs(fy));
      if (fz <= fy + gy.dot(d) + Scalar(0.5) * L * d.squaredNorm() + slack) break;
      L *= Scalar(2);
    }
    if (fz > fx) {
      if (restarted) break;  // no descent from x itself: numerically stalled
      y = x;
      Qy = Qx;
      t = Scalar(1);
      restarted = true;
      continue;
    }
    const Scalar tn = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * t * t)) / Scalar(2);
    const Scalar m = (t - Scalar(1)) / tn;
    y = z + m * (z - x);
    Qy = Qz + m * (Qz - Qx);
    x = std::move(z);
    Qx = std::move(Qz);
    fx = fz;
    t = tn;
    restarted = false;
    if (opts.record_trace) sol.trace.push_back(fx);
  }
  if (!sol.converged) {
    sol.kkt_residual = kkt_residual(p, x, VectorX<Scalar>(Qx + p.c));
    sol.converged = sol.kkt_residual <= opts.tol;
  }
  sol.iterations = it;
  sol.beta = std::move(x);
  sol.objective = fx;
  return sol;
}

/// Exhaustive grid search over the box (lower + k * step per coordinate, the
/// upper bound always included), restricted to band-feasible points.
/// Test oracle only; n <= 4.
template <typename Scalar>
VectorX<Scalar> qp_bruteforce_oracle(const BoxBandQp<Scalar>& p, Scalar grid_step) {
  if (!(grid_step > Scalar(0))) throw std::invalid_argument("qp oracle: grid_step must be positive");
  p.validate();
  const Index n = p.size();
  if (n > 4) throw std::invalid_argument("qp oracle: n must be <= 4, got " + std::to_string(n));

  std::vector<std::vector<Scalar>> axes(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& ax = axes[static_cast<std::size_t>(i)];
    const Scalar w = p.upper(i) - p.lower(i);
    const auto steps = static_cast<long long>(std::floor(w / grid_step));
    for (long long k = 0; k <= steps; ++k) ax.push_back(p.lower(i) + Scalar(k) * grid_step);
    if (ax.back() < p.upper(i)) ax.push_back(p.upper(i));
  }

  const Index last = n - 1;
  const Scalar qll = p.Q(last, last);
  const Scalar band_tol = Scalar(1e-12);
  VectorX<Scalar> x = p.lower;
  VectorX<Scalar> best;
  Scalar best_f = std::numeric_limits<Scalar>::infinity();

  // Odometer over the leading coordinates; the last coordinate is swept with
  // the objective written as a quadratic in that coordinate alone.
  std::vector<std::size_t> idx(static_cast<std::size_t>(last), 0);
  for (;;) {
    for (Index i = 0; i < last; ++i) x(i) = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    Scalar base(0), lin = p.c(last), band_base(0);
    for (Index i = 0; i < last; ++i) {
      for (Index j = 0; j < last; ++j) base += Scalar(0.5) * x(i) * p.Q(i, j) * x(j);
      base += p.c(i) * x(i);
      lin += p.Q(last, i) * x(i);
      if (p.band) band_base += p.band->a(i) * x(i);
    }
    for (const Scalar t : axes[static_cast<std::size_t>(last)]) {
      if (p.band) {
        const Scalar s = band_base + p.band->a(last) * t;
        if (s < p.band->lo - band_tol || s > p.band->hi + band_tol) continue;
      }
      const Scalar f = base + lin * t + Scalar(0.5) * qll * t * t;
      if (f < best_f) {
        best_f = f;
        best = x;
        best(last) = t;
      }
    }
    Index k = last - 1;
    for (; k >= 0; --k) {
      auto& c = idx[static_cast<std::size_t>(k)];
      if (++c < axes[static_cast<std::size_t>(k)].size()) break;
      c = 0;
    }
    if (k < 0) break;
  }
  if (best.size() == 0) throw InfeasibleProblem("qp oracle: no feasible grid point");
  return best;
}

}  // namespace covshift
