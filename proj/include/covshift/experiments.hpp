#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "covshift/datagen.hpp"
#include "covshift/kmm.hpp"
#include "covshift/ridge.hpp"
#include "covshift/serialization.hpp"

namespace covshift {

struct ReplicationRecord {
  std::string cell;
  int replication = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> values;
};

struct AggregateRow {
  std::string cell;
  std::string metric;
  int count = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample sd, 0 for a single record
  double median = 0.0;
};

struct PropertyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  json config;
  std::vector<ReplicationRecord> records;
  std::vector<AggregateRow> aggregates;
  json summary;
  std::vector<PropertyCheck> checks;
  double wall_clock_seconds = 0.0;

  bool all_checks_passed() const;
};

/// Cells in order of first appearance, metrics sorted by name.
std::vector<AggregateRow> aggregate_records(const std::vector<ReplicationRecord>& records);
const AggregateRow& find_aggregate(const ExperimentReport& r, const std::string& cell, const std::string& metric);

json records_to_json(const std::vector<ReplicationRecord>& records);
json report_to_json(const ExperimentReport& r);
/// Tidy layout: one line per (record, metric).
void write_records_csv(const std::filesystem::path& path, const ExperimentReport& r);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Callers store results by index so output order never depends
/// on scheduling.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body body) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Configurations. from_json starts from the defaults below and rejects
// unknown keys; to_json writes every field.

void to_json(json& j, const KmmConfig& c);
void from_json(const json& j, KmmConfig& c);
void to_json(json& j, const ShiftProblemParams& p);
void from_json(const json& j, ShiftProblemParams& p);

struct ToyConfig {
  Index n_tr = 500;
  Index n_te = 500;
  int trials = 20;
  std::uint64_t base_seed = 1;
  double noise_sd = 0.3;
  bool shift = true;
  KmmConfig kmm = [] {
    KmmConfig c;
    c.kernel = KernelSpec::polynomial(3, 1.0);
    return c;
  }();
  GammaSchedule gamma{GammaRule::InverseNtr, 1.0, std::nullopt};
  int threads = 0;
};
void to_json(json& j, const ToyConfig& c);
void from_json(const json& j, ToyConfig& c);

enum class RegressorKind { Lasso, KernelRidge };

struct Table1Config {
  std::vector<double> lambdas{0.1, 10.0};
  std::vector<std::pair<Index, Index>> sizes{{50, 500}, {500, 500}, {500, 50}};
  int replications = 100;
  std::uint64_t base_seed = 1000;
  ShiftProblemParams problem = [] {
    ShiftProblemParams p;
    p.mean_scale = 4.0;
    p.cov_scale = 0.1;
    p.c1_scale = 0.01;
    p.c2_scale = 1.5;
    p.noise_sd = 0.5;
    return p;
  }();
  Index oracle_samples = 100000;
  KmmConfig kmm = [] {
    KmmConfig c;
    c.kernel = KernelSpec::gaussian(std::sqrt(5.0));
    return c;
  }();
  RegressorKind regressor = RegressorKind::Lasso;
  /// Used when regressor is kernel ridge; lambda is then ignored.
  GammaSchedule gamma;
  int threads = 0;
};
void to_json(json& j, const Table1Config& c);
void from_json(const json& j, Table1Config& c);

struct UciConfig {
  std::string data_path;
  UciVariant variant = UciVariant::Original;
  std::vector<double> proportions{0.3, 0.5, 0.7};
  int replications = 10;
  std::uint64_t base_seed = 7;
  double sigma1 = -0.01;
  KmmConfig kmm = [] {
    KmmConfig c;
    c.kernel = KernelSpec::gaussian(std::sqrt(0.5));
    return c;
  }();
  double lambda = 5.0;
  GammaSchedule gamma{GammaRule::InverseNtr, 1.0, std::nullopt};
  int threads = 0;
};
void to_json(json& j, const UciConfig& c);
void from_json(const json& j, UciConfig& c);

struct RateConfig {
  std::vector<Index> sizes{50, 100, 200, 400, 800};
  int replications = 100;
  std::uint64_t base_seed = 99;
  /// Covariate distributions; g is a single kernel section centred at the test mean.
  ShiftProblemParams problem = [] {
    ShiftProblemParams p;
    p.dim = 2;
    p.mean_scale = 0.3;
    p.cov_scale = 0.5;
    p.dominating_train_cov = true;
    p.noise_sd = 0.1;
    return p;
  }();
  KernelSpec g_kernel = KernelSpec::gaussian(1.0);
  KmmConfig kmm = [] {
    KmmConfig c;
    c.kernel = KernelSpec::gaussian(1.0);
    return c;
  }();
  GammaSchedule gamma{GammaRule::InverseN, 1.0, std::nullopt};
  Index oracle_samples = 1000000;
  int bootstrap = 200;
  int threads = 0;
};
void to_json(json& j, const RateConfig& c);
void from_json(const json& j, RateConfig& c);

// ---------------------------------------------------------------------------

/// Slopes (no intercept) fitted by OLS, KMM-weighted least squares and the
/// robust risk, one record per trial.
ExperimentReport run_toy_experiment(const ToyConfig& cfg);

/// Average squared error of V_NR, V_KMM and V_R against the oracle mean, one
/// cell per (lambda, n_tr, n_te). Replication i uses seed base_seed + i in
/// every cell.
ExperimentReport run_table1(const Table1Config& cfg);

/// Test error of the three ERM modes under both losses for each training
/// proportion. The overload takes an already loaded dataset.
ExperimentReport run_uci_experiment(const UciConfig& cfg);
ExperimentReport run_uci_experiment(const UciConfig& cfg, const Dataset& data);

/// Median absolute error of each estimator as n_tr = n_te = n grows, with a
/// log-log slope fit and a bootstrap interval for the V_R slope.
ExperimentReport run_rate_sweep(const RateConfig& cfg);

/// Least-squares slope of log(err) against log(n).
double loglog_slope(const std::vector<double>& n, const std::vector<double>& err);
/// Number of consecutive pairs where the error goes up.
int count_inversions(const std::vector<double>& err);

}  // namespace covshift
