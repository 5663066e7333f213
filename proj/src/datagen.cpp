#include "covshift/datagen.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace covshift {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

Vector Rng::normal_vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

Matrix Rng::normal_matrix(Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void GaussianSpec::validate() const {
  if (mean.size() == 0) throw std::invalid_argument("gaussian: empty mean");
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
    throw DimensionMismatch("gaussian: covariance shape does not match mean");
  if (!covariance.isApprox(covariance.transpose(), 1e-12))
    throw std::invalid_argument("gaussian: covariance is not symmetric");
  if (Eigen::LLT<Matrix>(covariance).info() != Eigen::Success)
    throw std::invalid_argument("gaussian: covariance is not positive definite");
}

Matrix GaussianSpec::sample(Rng& rng, Index n) const {
  const Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("gaussian: covariance is not positive definite");
  const Matrix L = llt.matrixL();
  Matrix X(n, dim());
  for (Index i = 0; i < n; ++i) X.row(i) = (mean + L * rng.normal_vector(dim())).transpose();
  return X;
}

double GaussianSpec::log_pdf(const Vector& x) const { return log_pdf(Matrix(x.transpose()))(0); }

Vector GaussianSpec::log_pdf(const Matrix& X) const {
  if (X.cols() != dim()) throw DimensionMismatch("gaussian log_pdf: dimension mismatch");
  const Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("gaussian: covariance is not positive definite");
  const Matrix L = llt.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  const double d = static_cast<double>(dim());
  const Matrix centered = (X.rowwise() - mean.transpose()).transpose();
  const Matrix Z = L.triangularView<Eigen::Lower>().solve(centered);
  return (-0.5 * (Z.colwise().squaredNorm().array() + log_det + d * std::log(2.0 * std::numbers::pi))).transpose();
}

GaussianSpec gaussian_1d(double mean, double sd) {
  GaussianSpec g;
  g.mean = Vector::Constant(1, mean);
  g.covariance = Matrix::Constant(1, 1, sd * sd);
  return g;
}

GaussianSpec toy_train_distribution() { return gaussian_1d(0.5, 0.5); }
GaussianSpec toy_test_distribution() { return gaussian_1d(0.0, 0.3); }

double toy_population_slope() {
  const double s2 = 0.09;            // E x^2 under N(0, 0.3^2)
  const double m4 = 3.0 * s2 * s2;   // E x^4
  return (-s2 + m4) / s2;
}

ToyData gen_toy1d(Index n_tr, Index n_te, std::uint64_t seed, double noise_sd, bool shift) {
  if (n_tr < 1 || n_te < 1) throw std::invalid_argument("gen_toy1d: sizes must be >= 1");
  if (!shift && n_te != n_tr) throw std::invalid_argument("gen_toy1d: unshifted variant reuses the training covariates");
  Rng rng(seed);
  ToyData d;
  Matrix Xtr = toy_train_distribution().sample(rng, n_tr);
  Matrix Xte = shift ? toy_test_distribution().sample(rng, n_te) : Xtr;
  Vector ytr(n_tr), yte(n_te);
  for (Index i = 0; i < n_tr; ++i) ytr(i) = toy_regression(Xtr(i, 0)) + noise_sd * rng.normal();
  for (Index i = 0; i < n_te; ++i) yte(i) = toy_regression(Xte(i, 0)) + noise_sd * rng.normal();
  d.train = make_train(std::move(Xtr), std::move(ytr));
  d.test = make_test(std::move(Xte));
  d.test_labels = std::move(yte);
  return d;
}

double ShiftProblem::g(const Vector& x) const {
  return std::sin(c1 * x.squaredNorm()) + 1.0 / (1.0 + std::exp(c2.dot(x)));
}

Vector ShiftProblem::g(const Matrix& X) const {
  Vector out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) out(i) = g(Vector(X.row(i).transpose()));
  return out;
}

namespace {

Matrix random_spd(Rng& rng, Index d, double scale, double ridge) {
  const Matrix A = scale * rng.normal_matrix(d, d);
  Matrix S = A * A.transpose();
  S.diagonal().array() += ridge;
  return 0.5 * (S + S.transpose());
}

}  // namespace

ShiftProblem draw_shift_problem(const ShiftProblemParams& params, std::uint64_t seed) {
  if (params.dim < 1) throw std::invalid_argument("shift problem: dim must be >= 1");
  Rng rng(seed);
  const Index d = params.dim;
  ShiftProblem p;
  p.p_tr.mean = params.mean_scale * rng.normal_vector(d);
  p.p_te.mean = params.mean_scale * rng.normal_vector(d);
  p.p_te.covariance = random_spd(rng, d, params.cov_scale, params.cov_ridge);
  p.p_tr.covariance = random_spd(rng, d, params.cov_scale, params.cov_ridge);
  if (params.dominating_train_cov) p.p_tr.covariance += p.p_te.covariance;
  p.c1 = params.c1_scale * rng.normal();
  p.c2 = params.c2_scale * rng.normal_vector(d);
  p.noise_sd = params.noise_sd;
  return p;
}

ShiftSample sample_shift_problem(const ShiftProblem& problem, Index n_tr, Index n_te, std::uint64_t seed) {
  if (n_tr < 1 || n_te < 1) throw std::invalid_argument("shift sample: sizes must be >= 1");
  Rng rng(seed);
  ShiftSample s;
  Matrix Xtr = problem.p_tr.sample(rng, n_tr);
  Matrix Xte = problem.p_te.sample(rng, n_te);
  Vector ytr = problem.g(Xtr);
  for (Index i = 0; i < n_tr; ++i) ytr(i) += problem.noise_sd * rng.normal();
  Vector yte = problem.g(Xte);
  for (Index i = 0; i < n_te; ++i) yte(i) += problem.noise_sd * rng.normal();
  s.train = make_train(std::move(Xtr), std::move(ytr));
  s.test = make_test(std::move(Xte));
  s.test_labels = std::move(yte);
  return s;
}

double oracle_mean(const ShiftProblem& problem, Index samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("oracle_mean: samples must be >= 1");
  Rng rng(seed);
  const Eigen::LLT<Matrix> llt(problem.p_te.covariance);
  const Matrix L = llt.matrixL();
  const Index d = problem.p_te.dim();
  double total = 0.0;
  for (Index i = 0; i < samples; ++i) total += problem.g(Vector(problem.p_te.mean + L * rng.normal_vector(d)));
  return total / static_cast<double>(samples);
}

Gaussian10dData gen_gaussian10d(Index n_tr, Index n_te, std::uint64_t seed, const ShiftProblemParams& params,
                                Index oracle_samples) {
  Gaussian10dData out;
  out.problem = draw_shift_problem(params, mix_seed(seed, 0));
  auto sample = sample_shift_problem(out.problem, n_tr, n_te, mix_seed(seed, 1));
  out.train = std::move(sample.train);
  out.test = std::move(sample.test);
  out.nu_oracle = oracle_mean(out.problem, oracle_samples, mix_seed(seed, 2));
  return out;
}

std::vector<Index> biased_subsample_indices(const Dataset& train, double sigma1, std::uint64_t seed) {
  if (train.rows() == 0) throw std::invalid_argument("biased_subsample: empty training set");
  if (sigma1 < 0.0) {
    static std::once_flag warned;
    std::call_once(warned, [sigma1] {
      std::clog << "warning: biased_subsample with negative sigma1 = " << sigma1
                << " favours rows far from the sample mean\n";
    });
  }
  const Eigen::RowVectorXd xbar = train.X.colwise().mean();
  const Vector dist = (train.X.rowwise() - xbar).rowwise().norm();
  const Vector logit = -sigma1 * dist;
  const double top = logit.maxCoeff();
  Rng rng(seed);
  std::vector<Index> kept;
  for (Index i = 0; i < train.rows(); ++i) {
    const double prob = std::exp(logit(i) - top);
    if (rng.uniform() < prob) kept.push_back(i);
  }
  if (kept.empty()) throw std::runtime_error("biased_subsample: every row rejected; use a smaller |sigma1|");
  return kept;
}

Dataset biased_subsample(const Dataset& train, double sigma1, std::uint64_t seed) {
  const auto kept = biased_subsample_indices(train, sigma1, seed);
  return subset_rows(train, kept);
}

void standardize_columns(Matrix& X) {
  if (X.rows() == 0) return;
  const double n = static_cast<double>(X.rows());
  for (Index j = 0; j < X.cols(); ++j) {
    const double mu = X.col(j).mean();
    X.col(j).array() -= mu;
    const double sd = std::sqrt(X.col(j).squaredNorm() / n);
    if (sd > 0.0)
      X.col(j) /= sd;
    else
      X.col(j).setZero();
    // One correction pass removes the rounding residue of the first centering.
    X.col(j).array() -= X.col(j).mean();
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

UciData load_uci_breast_cancer(const std::filesystem::path& path, UciVariant variant) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open UCI file " + path.string());
  const std::size_t n_fields = variant == UciVariant::Original ? 11 : 32;
  const std::size_t n_feat = variant == UciVariant::Original ? 9 : 30;

  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  UciData out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_fields(line);
    if (f.size() != n_fields)
      throw std::runtime_error("UCI file line " + std::to_string(line_no) + ": expected " +
                               std::to_string(n_fields) + " fields, got " + std::to_string(f.size()));
    double id;
    if (!parse_double(f[0], id)) {
      if (line_no == 1) continue;  // header
      throw std::runtime_error("UCI file line " + std::to_string(line_no) + ": malformed id");
    }
    bool missing = false;
    std::vector<double> feat(n_feat);
    const std::size_t first = variant == UciVariant::Original ? 1 : 2;
    for (std::size_t j = 0; j < n_feat; ++j) {
      const auto& s = f[first + j];
      if (s == "?") {
        missing = true;
        continue;
      }
      if (!parse_double(s, feat[j]))
        throw std::runtime_error("UCI file line " + std::to_string(line_no) + ": malformed feature '" + s + "'");
    }
    if (missing) {
      ++out.dropped_rows;
      continue;
    }
    double label;
    if (variant == UciVariant::Original) {
      const auto& c = f[10];
      if (c == "2")
        label = 0.0;
      else if (c == "4")
        label = 1.0;
      else
        throw std::runtime_error("UCI file line " + std::to_string(line_no) + ": class must be 2 or 4");
    } else {
      const auto& c = f[1];
      if (c == "B")
        label = 0.0;
      else if (c == "M")
        label = 1.0;
      else
        throw std::runtime_error("UCI file line " + std::to_string(line_no) + ": diagnosis must be B or M");
    }
    rows.push_back(std::move(feat));
    labels.push_back(label);
  }
  if (rows.empty()) throw std::runtime_error("UCI file " + path.string() + " has no complete rows");
  if (out.dropped_rows > 0)
    std::clog << "load_uci_breast_cancer: dropped " << out.dropped_rows << " rows with missing values\n";

  Matrix X(static_cast<Index>(rows.size()), static_cast<Index>(n_feat));
  Vector y(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < n_feat; ++j) X(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    y(static_cast<Index>(i)) = labels[i];
  }
  standardize_columns(X);
  out.data = make_train(std::move(X), std::move(y));
  return out;
}

}  // namespace covshift
