#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "covshift/types.hpp"

namespace covshift {

/// 64-bit Mersenne Twister with uniform/normal transforms written out here, so
/// generated data does not depend on the standard library's distribution
/// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Standard normal (Marsaglia polar method).
  double normal();
  Vector normal_vector(Index n);
  Matrix normal_matrix(Index rows, Index cols);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer, for deriving independent sub-stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

struct GaussianSpec {
  Vector mean;
  Matrix covariance;

  Index dim() const { return mean.size(); }
  void validate() const;
  /// n draws, one per row.
  Matrix sample(Rng& rng, Index n) const;
  double log_pdf(const Vector& x) const;
  Vector log_pdf(const Matrix& X) const;
};

GaussianSpec gaussian_1d(double mean, double sd);

// ---------------------------------------------------------------------------
// One-dimensional polynomial regression under shift.

struct ToyData {
  Dataset train;
  Dataset test;
  Vector test_labels;  // held out
};

GaussianSpec toy_train_distribution();  // N(0.5, 0.5^2)
GaussianSpec toy_test_distribution();   // N(0, 0.3^2)
inline double toy_regression(double x) { return -x + x * x * x; }
/// argmin_a E_te[(g(x) - a x)^2] = E_te[x g(x)] / E_te[x^2] for the toy pair.
double toy_population_slope();

/// When shift is false the test covariates are the training covariates.
ToyData gen_toy1d(Index n_tr, Index n_te, std::uint64_t seed, double noise_sd = 0.3, bool shift = true);

// ---------------------------------------------------------------------------
// Ten-dimensional Gaussian pair with g(x) = sin(c1 ||x||^2) + 1/(1 + exp(c2^T x)).

struct ShiftProblemParams {
  Index dim = 10;
  /// Means drawn N(0, mean_scale^2 I).
  double mean_scale = 1.0;
  /// Covariances A A^T + cov_ridge I with A_ij ~ N(0, cov_scale^2).
  double cov_scale = 1.0;
  double cov_ridge = 0.1;
  /// When set, the training covariance is the test covariance plus an
  /// independent draw of the same form, which keeps the density ratio bounded.
  bool dominating_train_cov = false;
  /// c1 ~ N(0, c1_scale^2), c2 ~ N(0, c2_scale^2 I).
  double c1_scale = 1.0;
  double c2_scale = 1.0;
  double noise_sd = 1.0;
};

struct ShiftProblem {
  GaussianSpec p_tr;
  GaussianSpec p_te;
  double c1 = 0.0;
  Vector c2;
  double noise_sd = 1.0;

  double g(const Vector& x) const;
  Vector g(const Matrix& X) const;
};

ShiftProblem draw_shift_problem(const ShiftProblemParams& params, std::uint64_t seed);

struct ShiftSample {
  Dataset train;  // noisy labels
  Dataset test;
  Vector test_labels;  // noisy, held out
};

ShiftSample sample_shift_problem(const ShiftProblem& problem, Index n_tr, Index n_te, std::uint64_t seed);

/// Noise-free Monte Carlo mean of g under the test distribution.
double oracle_mean(const ShiftProblem& problem, Index samples, std::uint64_t seed);

struct Gaussian10dData {
  ShiftProblem problem;
  Dataset train;
  Dataset test;
  double nu_oracle = 0.0;
};

/// Problem, sample and oracle all derived from one seed (oracle on its own
/// sub-stream).
Gaussian10dData gen_gaussian10d(Index n_tr, Index n_te, std::uint64_t seed, const ShiftProblemParams& params = {},
                                Index oracle_samples = 100000);

// ---------------------------------------------------------------------------
// Biased subsampling and UCI ingestion.

/// Row i is kept with probability exp(-sigma1 ||x_i - xbar||) normalized by
/// the largest such value over the rows. Negative sigma1 favours rows far from
/// the mean and logs a warning.
std::vector<Index> biased_subsample_indices(const Dataset& train, double sigma1, std::uint64_t seed);
Dataset biased_subsample(const Dataset& train, double sigma1, std::uint64_t seed);

enum class UciVariant { Original, Diagnostic };

struct UciData {
  Dataset data;  // standardized features, labels in {0,1}
  Index dropped_rows = 0;
};

/// Original: id, 9 integer features, class {2,4} ('?' marks missing values).
/// Diagnostic: id, diagnosis {B,M}, 30 real features.
UciData load_uci_breast_cancer(const std::filesystem::path& path, UciVariant variant = UciVariant::Original);

/// Zero mean, unit (population) variance per column; constant columns become 0.
void standardize_columns(Matrix& X);

}  // namespace covshift
