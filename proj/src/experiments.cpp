#include "covshift/experiments.hpp"

#include <chrono>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "covshift/csv_io.hpp"
#include "covshift/erm.hpp"
#include "covshift/estimators.hpp"

namespace covshift {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Reads fields from a JSON object, remembering which keys were consumed.
class StrictReader {
 public:
  StrictReader(const json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j_.is_object()) throw std::invalid_argument(what_ + ": expected a JSON object");
  }
  template <typename T>
  void get(const std::string& key, T& out) {
    known_.insert(key);
    if (j_.contains(key)) j_.at(key).get_to(out);
  }
  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null())
      out.reset();
    else
      out = j_.at(key).get<T>();
  }
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!known_.count(k)) throw std::invalid_argument(what_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string what_;
  std::set<std::string> known_;
};

std::string to_string(UciVariant v) { return v == UciVariant::Original ? "original" : "diagnostic"; }
UciVariant uci_variant_from_string(const std::string& s) {
  if (s == "original") return UciVariant::Original;
  if (s == "diagnostic") return UciVariant::Diagnostic;
  throw std::invalid_argument("unknown UCI variant '" + s + "'");
}

std::string to_string(RegressorKind r) { return r == RegressorKind::Lasso ? "lasso" : "kernel_ridge"; }
RegressorKind regressor_from_string(const std::string& s) {
  if (s == "lasso") return RegressorKind::Lasso;
  if (s == "kernel_ridge") return RegressorKind::KernelRidge;
  throw std::invalid_argument("unknown regressor '" + s + "'");
}

std::string format_cell_value(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void finish_report(ExperimentReport& r, std::chrono::steady_clock::time_point t0) {
  r.aggregates = aggregate_records(r.records);
  r.wall_clock_seconds = seconds_since(t0);
}

void check_replications(int reps) {
  if (reps < 1) throw std::invalid_argument("experiment: replications must be >= 1");
}

// Fisher-Yates with the library RNG so splits do not depend on std::shuffle.
std::vector<Index> permutation(Index n, Rng& rng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.uniform() * static_cast<double>(i + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(std::min(j, i))]);
  }
  return p;
}

}  // namespace

bool ExperimentReport::all_checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const PropertyCheck& c) { return c.passed; });
}

std::vector<AggregateRow> aggregate_records(const std::vector<ReplicationRecord>& records) {
  std::vector<std::string> cells;
  std::map<std::string, std::map<std::string, std::vector<double>>> groups;
  for (const auto& r : records) {
    if (!groups.count(r.cell)) cells.push_back(r.cell);
    auto& g = groups[r.cell];
    for (const auto& [k, v] : r.values) g[k].push_back(v);
  }
  std::vector<AggregateRow> out;
  for (const auto& cell : cells)
    for (const auto& [metric, vals] : groups[cell]) {
      AggregateRow a;
      a.cell = cell;
      a.metric = metric;
      a.count = static_cast<int>(vals.size());
      a.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
      double ss = 0.0;
      for (double v : vals) ss += (v - a.mean) * (v - a.mean);
      a.sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
      a.median = median_of(vals);
      out.push_back(a);
    }
  return out;
}

const AggregateRow& find_aggregate(const ExperimentReport& r, const std::string& cell, const std::string& metric) {
  for (const auto& a : r.aggregates)
    if (a.cell == cell && a.metric == metric) return a;
  throw std::out_of_range("no aggregate for " + cell + "/" + metric);
}

json records_to_json(const std::vector<ReplicationRecord>& records) {
  json arr = json::array();
  for (const auto& r : records)
    arr.push_back({{"cell", r.cell}, {"replication", r.replication}, {"seed", r.seed}, {"values", r.values}});
  return arr;
}

json report_to_json(const ExperimentReport& r) {
  json aggs = json::array();
  for (const auto& a : r.aggregates)
    aggs.push_back({{"cell", a.cell},
                    {"metric", a.metric},
                    {"count", a.count},
                    {"mean", a.mean},
                    {"sd", a.sd},
                    {"median", a.median}});
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return json{{"experiment", r.experiment},       {"config", r.config}, {"records", records_to_json(r.records)},
              {"aggregates", aggs},               {"summary", r.summary}, {"checks", checks},
              {"wall_clock_seconds", r.wall_clock_seconds}};
}

void write_records_csv(const std::filesystem::path& path, const ExperimentReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "experiment,cell,replication,seed,metric,value\n";
  for (const auto& rec : r.records)
    for (const auto& [k, v] : rec.values)
      out << r.experiment << ",\"" << rec.cell << "\"," << rec.replication << ',' << rec.seed << ',' << k << ','
          << format_double(v) << '\n';
}

double loglog_slope(const std::vector<double>& n, const std::vector<double>& err) {
  if (n.size() != err.size() || n.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 matching points");
  const auto m = static_cast<Index>(n.size());
  Vector lx(m), ly(m);
  for (Index i = 0; i < m; ++i) {
    if (!(n[static_cast<std::size_t>(i)] > 0.0) || !(err[static_cast<std::size_t>(i)] > 0.0))
      throw std::invalid_argument("loglog_slope: values must be positive");
    lx(i) = std::log(n[static_cast<std::size_t>(i)]);
    ly(i) = std::log(err[static_cast<std::size_t>(i)]);
  }
  const Vector cx = lx.array() - lx.mean();
  return cx.dot(Vector(ly.array() - ly.mean())) / cx.squaredNorm();
}

int count_inversions(const std::vector<double>& err) {
  int c = 0;
  for (std::size_t i = 1; i < err.size(); ++i)
    if (err[i] > err[i - 1]) ++c;
  return c;
}

// ---------------------------------------------------------------------------
// Config serialization.

void to_json(json& j, const KmmConfig& c) {
  j = json{{"kernel", c.kernel},
           {"B", c.B},
           {"epsilon", c.epsilon ? json(*c.epsilon) : json(nullptr)},
           {"include_band", c.include_band},
           {"qp_tol", c.qp.tol},
           {"qp_max_iter", c.qp.max_iter}};
}

void from_json(const json& j, KmmConfig& c) {
  StrictReader r(j, "kmm config");
  r.get("kernel", c.kernel);
  r.get("B", c.B);
  r.get("epsilon", c.epsilon);
  r.get("include_band", c.include_band);
  r.get("qp_tol", c.qp.tol);
  r.get("qp_max_iter", c.qp.max_iter);
  r.finish();
  c.validate();
}

void to_json(json& j, const ShiftProblemParams& p) {
  j = json{{"dim", p.dim},
           {"mean_scale", p.mean_scale},
           {"cov_scale", p.cov_scale},
           {"cov_ridge", p.cov_ridge},
           {"dominating_train_cov", p.dominating_train_cov},
           {"c1_scale", p.c1_scale},
           {"c2_scale", p.c2_scale},
           {"noise_sd", p.noise_sd}};
}

void from_json(const json& j, ShiftProblemParams& p) {
  StrictReader r(j, "problem config");
  r.get("dim", p.dim);
  r.get("mean_scale", p.mean_scale);
  r.get("cov_scale", p.cov_scale);
  r.get("cov_ridge", p.cov_ridge);
  r.get("dominating_train_cov", p.dominating_train_cov);
  r.get("c1_scale", p.c1_scale);
  r.get("c2_scale", p.c2_scale);
  r.get("noise_sd", p.noise_sd);
  r.finish();
}

void to_json(json& j, const ToyConfig& c) {
  j = json{{"n_tr", c.n_tr},       {"n_te", c.n_te}, {"trials", c.trials}, {"base_seed", c.base_seed},
           {"noise_sd", c.noise_sd}, {"shift", c.shift}, {"kmm", c.kmm},       {"gamma", c.gamma},
           {"threads", c.threads}};
}

void from_json(const json& j, ToyConfig& c) {
  StrictReader r(j, "toy config");
  r.get("n_tr", c.n_tr);
  r.get("n_te", c.n_te);
  r.get("trials", c.trials);
  r.get("base_seed", c.base_seed);
  r.get("noise_sd", c.noise_sd);
  r.get("shift", c.shift);
  r.get("kmm", c.kmm);
  r.get("gamma", c.gamma);
  r.get("threads", c.threads);
  r.finish();
}

void to_json(json& j, const Table1Config& c) {
  json sizes = json::array();
  for (const auto& [a, b] : c.sizes) sizes.push_back({a, b});
  j = json{{"lambdas", c.lambdas},
           {"sizes", sizes},
           {"replications", c.replications},
           {"base_seed", c.base_seed},
           {"problem", c.problem},
           {"oracle_samples", c.oracle_samples},
           {"kmm", c.kmm},
           {"regressor", to_string(c.regressor)},
           {"gamma", c.gamma},
           {"threads", c.threads}};
}

void from_json(const json& j, Table1Config& c) {
  StrictReader r(j, "table1 config");
  r.get("lambdas", c.lambdas);
  json sizes;
  r.get("sizes", sizes);
  if (!sizes.is_null()) {
    c.sizes.clear();
    for (const auto& s : sizes) c.sizes.emplace_back(s.at(0).get<Index>(), s.at(1).get<Index>());
  }
  r.get("replications", c.replications);
  r.get("base_seed", c.base_seed);
  r.get("problem", c.problem);
  r.get("oracle_samples", c.oracle_samples);
  r.get("kmm", c.kmm);
  std::string reg = to_string(c.regressor);
  r.get("regressor", reg);
  c.regressor = regressor_from_string(reg);
  r.get("gamma", c.gamma);
  r.get("threads", c.threads);
  r.finish();
}

void to_json(json& j, const UciConfig& c) {
  j = json{{"data_path", c.data_path},
           {"variant", to_string(c.variant)},
           {"proportions", c.proportions},
           {"replications", c.replications},
           {"base_seed", c.base_seed},
           {"sigma1", c.sigma1},
           {"kmm", c.kmm},
           {"lambda", c.lambda},
           {"gamma", c.gamma},
           {"threads", c.threads}};
}

void from_json(const json& j, UciConfig& c) {
  StrictReader r(j, "uci config");
  r.get("data_path", c.data_path);
  std::string variant = to_string(c.variant);
  r.get("variant", variant);
  c.variant = uci_variant_from_string(variant);
  r.get("proportions", c.proportions);
  r.get("replications", c.replications);
  r.get("base_seed", c.base_seed);
  r.get("sigma1", c.sigma1);
  r.get("kmm", c.kmm);
  r.get("lambda", c.lambda);
  r.get("gamma", c.gamma);
  r.get("threads", c.threads);
  r.finish();
}

void to_json(json& j, const RateConfig& c) {
  j = json{{"sizes", c.sizes},
           {"replications", c.replications},
           {"base_seed", c.base_seed},
           {"problem", c.problem},
           {"g_kernel", c.g_kernel},
           {"kmm", c.kmm},
           {"gamma", c.gamma},
           {"oracle_samples", c.oracle_samples},
           {"bootstrap", c.bootstrap},
           {"threads", c.threads}};
}

void from_json(const json& j, RateConfig& c) {
  StrictReader r(j, "rates config");
  r.get("sizes", c.sizes);
  r.get("replications", c.replications);
  r.get("base_seed", c.base_seed);
  r.get("problem", c.problem);
  r.get("g_kernel", c.g_kernel);
  r.get("kmm", c.kmm);
  r.get("gamma", c.gamma);
  r.get("oracle_samples", c.oracle_samples);
  r.get("bootstrap", c.bootstrap);
  r.get("threads", c.threads);
  r.finish();
}

// ---------------------------------------------------------------------------
// Toy slopes.

ExperimentReport run_toy_experiment(const ToyConfig& cfg) {
  check_replications(cfg.trials);
  cfg.kmm.validate();
  cfg.gamma.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.experiment = "toy";
  rep.config = cfg;
  rep.records.resize(static_cast<std::size_t>(cfg.trials));
  const double gamma = schedule_gamma(cfg.gamma, cfg.n_tr, cfg.n_te);
  const double target = toy_population_slope();

  parallel_for(rep.records.size(), cfg.threads, [&](std::size_t i) {
    const std::uint64_t seed = cfg.base_seed + i;
    const ToyData d = gen_toy1d(cfg.n_tr, cfg.n_te, seed, cfg.noise_sd, cfg.shift);
    const Vector& y = d.train.labels();
    const ImportanceWeights w = kmm_weights(d.train.X, d.test.X, cfg.kmm);
    const KernelRidgeModel g = fit_kernel_ridge(d.train.X, y, gamma, cfg.kmm.kernel);

    const double ols = weighted_linear_fit(d.train.X, y, Vector::Ones(y.size()))(0);
    const double kmm = weighted_linear_fit(d.train.X, y, w.beta)(0);
    const double robust = robust_linear_fit(d.train.X, y, d.test.X, w.beta, g.as_predictor())(0);

    auto& rec = rep.records[i];
    rec.cell = "toy";
    rec.replication = static_cast<int>(i);
    rec.seed = seed;
    rec.values = {{"slope_ols", ols},
                  {"slope_kmm", kmm},
                  {"slope_robust", robust},
                  {"abs_err_ols", std::abs(ols - target)},
                  {"abs_err_kmm", std::abs(kmm - target)},
                  {"abs_err_robust", std::abs(robust - target)},
                  {"l_hat", w.l_hat},
                  {"mean_beta", w.mean_beta}};
  });
  finish_report(rep, t0);

  const double m_ols = find_aggregate(rep, "toy", "slope_ols").median;
  const double m_kmm = find_aggregate(rep, "toy", "slope_kmm").median;
  const double m_rob = find_aggregate(rep, "toy", "slope_robust").median;
  rep.summary = {{"population_slope", target},
                 {"gamma", gamma},
                 {"median_slope", {{"ols", m_ols}, {"kmm", m_kmm}, {"robust", m_rob}}},
                 {"density_ratio_baseline", "unimplemented"}};
  if (cfg.shift) {
    const double e_ols = std::abs(m_ols - target), e_kmm = std::abs(m_kmm - target), e_rob = std::abs(m_rob - target);
    rep.checks.push_back({"robust_median_closer_than_ols", e_rob < e_ols,
                          "robust " + format_cell_value(e_rob) + " vs ols " + format_cell_value(e_ols)});
    rep.checks.push_back({"robust_within_0.05_of_kmm", e_rob <= e_kmm + 0.05,
                          "robust " + format_cell_value(e_rob) + " vs kmm " + format_cell_value(e_kmm)});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Ten-dimensional estimation table.

ExperimentReport run_table1(const Table1Config& cfg) {
  check_replications(cfg.replications);
  cfg.kmm.validate();
  if (cfg.lambdas.empty() || cfg.sizes.empty()) throw std::invalid_argument("table1: empty grid");
  for (double l : cfg.lambdas)
    if (cfg.regressor == RegressorKind::Lasso && !(l >= 0.0)) throw std::invalid_argument("table1: lambda must be >= 0");
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.experiment = "table1";
  rep.config = cfg;

  const std::size_t L = cfg.lambdas.size(), S = cfg.sizes.size(), R = static_cast<std::size_t>(cfg.replications);
  auto cell_name = [&](std::size_t li, std::size_t si) {
    return "lambda=" + format_cell_value(cfg.lambdas[li]) + ",n_tr=" + std::to_string(cfg.sizes[si].first) +
           ",n_te=" + std::to_string(cfg.sizes[si].second);
  };
  // records[(li * S + si) * R + rep]
  std::vector<ReplicationRecord> records(L * S * R);

  parallel_for(R, cfg.threads, [&](std::size_t r) {
    const std::uint64_t seed = cfg.base_seed + r;
    const ShiftProblem problem = draw_shift_problem(cfg.problem, mix_seed(seed, 0));
    const double nu = oracle_mean(problem, cfg.oracle_samples, mix_seed(seed, 2));
    for (std::size_t si = 0; si < S; ++si) {
      const auto [n_tr, n_te] = cfg.sizes[si];
      const ShiftSample s = sample_shift_problem(problem, n_tr, n_te, mix_seed(seed, 1));
      const Vector& y = s.train.labels();
      const ImportanceWeights w = kmm_weights(s.train.X, s.test.X, cfg.kmm);
      for (std::size_t li = 0; li < L; ++li) {
        Predictor g;
        if (cfg.regressor == RegressorKind::Lasso)
          g = fit_lasso_linear(s.train.X, y, cfg.lambdas[li]).as_predictor();
        else
          g = fit_kernel_ridge(s.train.X, y, schedule_gamma(cfg.gamma, n_tr, n_te), cfg.kmm.kernel).as_predictor();
        const RobustTerms t = robust_combination(w.beta, y, g(s.train.X), g(s.test.X));
        const double v_kmm = estimate_v_kmm(y, w.beta);
        auto& rec = records[(li * S + si) * R + r];
        rec.cell = cell_name(li, si);
        rec.replication = static_cast<int>(r);
        rec.seed = seed;
        rec.values = {{"nu", nu},
                      {"v_nr", t.plugin_term},
                      {"v_kmm", v_kmm},
                      {"v_r", t.v_r},
                      {"sqerr_nr", (t.plugin_term - nu) * (t.plugin_term - nu)},
                      {"sqerr_kmm", (v_kmm - nu) * (v_kmm - nu)},
                      {"sqerr_r", (t.v_r - nu) * (t.v_r - nu)},
                      {"l_hat", w.l_hat},
                      {"mean_beta", w.mean_beta},
                      {"kkt_residual", w.kkt_residual}};
      }
    }
  });
  rep.records = std::move(records);
  finish_report(rep, t0);

  json rows = json::array();
  int ordered = 0;
  for (std::size_t li = 0; li < L; ++li)
    for (std::size_t si = 0; si < S; ++si) {
      const std::string c = cell_name(li, si);
      const double nr = find_aggregate(rep, c, "sqerr_nr").mean;
      const double km = find_aggregate(rep, c, "sqerr_kmm").mean;
      const double vr = find_aggregate(rep, c, "sqerr_r").mean;
      const bool ok = vr <= std::min(nr, km) + 0.01;
      ordered += ok;
      rows.push_back({{"lambda", cfg.lambdas[li]},
                      {"n_tr", cfg.sizes[si].first},
                      {"n_te", cfg.sizes[si].second},
                      {"mse_nr", nr},
                      {"mse_kmm", km},
                      {"mse_r", vr},
                      {"v_r_on_par", ok}});
    }
  const int cells = static_cast<int>(L * S);
  rep.summary = {{"rows", rows}, {"cells_v_r_on_par", ordered}};
  rep.checks.push_back({"v_r_within_0.01_of_best", ordered >= cells - 1,
                        std::to_string(ordered) + " of " + std::to_string(cells) + " cells"});
  return rep;
}

// ---------------------------------------------------------------------------
// Classification under biased subsampling.

ExperimentReport run_uci_experiment(const UciConfig& cfg) {
  if (cfg.data_path.empty()) throw std::invalid_argument("uci: data_path is required");
  const UciData data = load_uci_breast_cancer(cfg.data_path, cfg.variant);
  return run_uci_experiment(cfg, data.data);
}

ExperimentReport run_uci_experiment(const UciConfig& cfg, const Dataset& data) {
  check_replications(cfg.replications);
  cfg.kmm.validate();
  cfg.gamma.validate();
  validate(data);
  if (!data.has_labels()) throw std::invalid_argument("uci: labels required");
  for (double p : cfg.proportions)
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("uci: proportions must lie in (0,1)");
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.experiment = "uci";
  rep.config = cfg;

  const std::size_t P = cfg.proportions.size(), R = static_cast<std::size_t>(cfg.replications);
  std::vector<ReplicationRecord> records(P * R);
  const Index N = data.rows();

  parallel_for(P * R, cfg.threads, [&](std::size_t idx) {
    const std::size_t pi = idx / R, r = idx % R;
    const std::uint64_t seed = cfg.base_seed + r;
    Rng rng(mix_seed(seed, 0));
    const auto perm = permutation(N, rng);
    const auto n_train = static_cast<Index>(std::floor(cfg.proportions[pi] * static_cast<double>(N)));
    if (n_train < 1 || n_train >= N) throw std::invalid_argument("uci: proportion leaves an empty split");
    const std::vector<Index> tr_idx(perm.begin(), perm.begin() + n_train), te_idx(perm.begin() + n_train, perm.end());
    const Dataset pool = subset_rows(data, tr_idx);
    const Dataset test = subset_rows(data, te_idx);
    const Dataset train = biased_subsample(pool, cfg.sigma1, mix_seed(seed, 1));
    const Vector& y = train.labels();
    const Vector& y_te = test.labels();

    const ImportanceWeights w = kmm_weights(train.X, test.X, cfg.kmm);
    const double gamma = schedule_gamma(cfg.gamma, train.rows(), test.rows());
    const Predictor g = fit_kernel_ridge(train.X, y, gamma, cfg.kmm.kernel).as_predictor();
    const KernelSpec& k = cfg.kmm.kernel;
    auto error = [&](const ErmFit& f) { return (classify_erm(f, test.X) - y_te).cwiseAbs().mean(); };

    auto& rec = records[idx];
    rec.cell = "proportion=" + format_cell_value(cfg.proportions[pi]);
    rec.replication = static_cast<int>(r);
    rec.seed = seed;
    rec.values = {
        {"n_train", static_cast<double>(train.rows())},
        {"n_test", static_cast<double>(test.rows())},
        {"l_hat", w.l_hat},
        {"squared_unweighted", error(fit_unweighted_nr_erm(test.X, g, cfg.lambda, k, ErmLoss::Squared))},
        {"squared_kmm", error(fit_kmm_weighted_ridge(train.X, y, w.beta, cfg.lambda, k, test.rows()))},
        {"squared_robust", error(fit_robust_least_squares(train.X, y, test.X, w.beta, g, cfg.lambda, k))},
        {"logistic_unweighted", error(fit_unweighted_nr_erm(test.X, g, cfg.lambda, k, ErmLoss::Logistic))},
        {"logistic_kmm", error(fit_kmm_weighted_logistic(train.X, y, w.beta, cfg.lambda, k))},
        {"logistic_robust", error(fit_robust_logistic(train.X, y, test.X, w.beta, g, cfg.lambda, k))}};
  });
  rep.records = std::move(records);
  finish_report(rep, t0);

  json rows = json::array();
  bool in_range = true, robust_ok = true;
  for (const auto& rec : rep.records)
    for (const auto& [key, v] : rec.values)
      if (key.starts_with("squared_") || key.starts_with("logistic_")) in_range = in_range && v >= 0.0 && v <= 1.0;
  for (double p : cfg.proportions) {
    const std::string c = "proportion=" + format_cell_value(p);
    json row = {{"proportion", p}};
    for (const std::string loss : {"squared", "logistic"}) {
      const double un = find_aggregate(rep, c, loss + "_unweighted").mean;
      const double km = find_aggregate(rep, c, loss + "_kmm").mean;
      const double ro = find_aggregate(rep, c, loss + "_robust").mean;
      row[loss] = {{"unweighted", un}, {"kmm", km}, {"robust", ro}};
      robust_ok = robust_ok && ro <= std::max(un, km) + 0.02;
    }
    rows.push_back(row);
  }
  rep.summary = {{"rows", rows}, {"n_rows", N}};
  rep.checks.push_back({"errors_in_unit_interval", in_range, ""});
  rep.checks.push_back({"robust_not_worse_than_max_plus_0.02", robust_ok, ""});
  return rep;
}

// ---------------------------------------------------------------------------
// Error trend in n.

ExperimentReport run_rate_sweep(const RateConfig& cfg) {
  check_replications(cfg.replications);
  cfg.kmm.validate();
  cfg.gamma.validate();
  cfg.g_kernel.validate();
  if (cfg.sizes.size() < 2) throw std::invalid_argument("rates: need at least two sizes");
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.experiment = "rates";
  rep.config = cfg;

  const ShiftProblem problem = draw_shift_problem(cfg.problem, mix_seed(cfg.base_seed, 0));
  const Matrix center = problem.p_te.mean.transpose();
  auto g = [&](const Matrix& X) -> Vector { return cross_gram(cfg.g_kernel, X, center).col(0); };

  double nu = 0.0;
  {
    Rng rng(mix_seed(cfg.base_seed, 1));
    const Index chunk = 100000;
    for (Index done = 0; done < cfg.oracle_samples; done += chunk) {
      const Index m = std::min(chunk, cfg.oracle_samples - done);
      nu += g(problem.p_te.sample(rng, m)).sum();
    }
    nu /= static_cast<double>(cfg.oracle_samples);
  }

  const std::size_t S = cfg.sizes.size(), R = static_cast<std::size_t>(cfg.replications);
  std::vector<ReplicationRecord> records(S * R);
  parallel_for(S * R, cfg.threads, [&](std::size_t idx) {
    const std::size_t si = idx / R, r = idx % R;
    const Index n = cfg.sizes[si];
    const std::uint64_t seed = cfg.base_seed + r;
    Rng rng(mix_seed(seed, 10 + si));
    const Matrix Xtr = problem.p_tr.sample(rng, n);
    const Matrix Xte = problem.p_te.sample(rng, n);
    Vector y = g(Xtr);
    for (Index i = 0; i < n; ++i) y(i) += cfg.problem.noise_sd * rng.normal();

    const ImportanceWeights w = kmm_weights(Xtr, Xte, cfg.kmm);
    const KernelRidgeModel model = fit_kernel_ridge(Xtr, y, schedule_gamma(cfg.gamma, n, n), cfg.g_kernel);
    const RobustTerms t = robust_combination(w.beta, y, model.predict(Xtr), model.predict(Xte));
    const double v_kmm = estimate_v_kmm(y, w.beta);

    auto& rec = records[idx];
    rec.cell = "n=" + std::to_string(n);
    rec.replication = static_cast<int>(r);
    rec.seed = seed;
    rec.values = {{"v_nr", t.plugin_term},
                  {"v_kmm", v_kmm},
                  {"v_r", t.v_r},
                  {"err_nr", std::abs(t.plugin_term - nu)},
                  {"err_kmm", std::abs(v_kmm - nu)},
                  {"err_r", std::abs(t.v_r - nu)}};
  });
  rep.records = std::move(records);
  finish_report(rep, t0);

  std::vector<double> ns;
  for (Index n : cfg.sizes) ns.push_back(static_cast<double>(n));
  json medians, slopes;
  bool positive = true;
  std::vector<double> med_r;
  for (const std::string est : {"nr", "kmm", "r"}) {
    std::vector<double> m;
    for (Index n : cfg.sizes) m.push_back(find_aggregate(rep, "n=" + std::to_string(n), "err_" + est).median);
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t r = 0; r < R; ++r) positive = positive && rep.records[i * R + r].values.at("err_" + est) > 0.0;
    medians[est] = m;
    slopes[est] = loglog_slope(ns, m);
    if (est == "r") med_r = m;
  }

  // Bootstrap over replications within each n for the V_R slope.
  std::vector<double> boot;
  Rng brng(mix_seed(cfg.base_seed, 2));
  for (int b = 0; b < cfg.bootstrap; ++b) {
    std::vector<double> m(S);
    for (std::size_t si = 0; si < S; ++si) {
      std::vector<double> draw(R);
      for (std::size_t k = 0; k < R; ++k) {
        const auto pick = std::min<std::size_t>(R - 1, static_cast<std::size_t>(brng.uniform() * static_cast<double>(R)));
        draw[k] = rep.records[si * R + pick].values.at("err_r");
      }
      m[si] = median_of(std::move(draw));
    }
    boot.push_back(loglog_slope(ns, m));
  }
  json ci = nullptr;
  if (!boot.empty()) {
    std::sort(boot.begin(), boot.end());
    auto q = [&](double p) { return boot[std::min(boot.size() - 1, static_cast<std::size_t>(p * boot.size()))]; };
    ci = {{"low", q(0.025)}, {"high", q(0.975)}, {"width", q(0.975) - q(0.025)}};
  }

  const int inv = count_inversions(med_r);
  const double slope_r = slopes["r"].get<double>();
  rep.summary = {{"nu", nu}, {"sizes", cfg.sizes}, {"median_abs_error", medians},
                 {"loglog_slope", slopes}, {"v_r_inversions", inv}, {"v_r_slope_ci", ci}};
  rep.checks.push_back({"v_r_median_error_nonincreasing", inv <= 1, std::to_string(inv) + " inversions"});
  rep.checks.push_back({"v_r_slope_at_most_-0.3", slope_r <= -0.3, "slope " + format_cell_value(slope_r)});
  rep.checks.push_back({"errors_positive", positive, ""});
  return rep;
}

}  // namespace covshift
