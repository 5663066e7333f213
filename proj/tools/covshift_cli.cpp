#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "covshift/csv_io.hpp"
#include "covshift/datagen.hpp"
#include "covshift/erm.hpp"
#include "covshift/estimators.hpp"
#include "covshift/experiments.hpp"
#include "covshift/kmm.hpp"
#include "covshift/ridge.hpp"
#include "covshift/serialization.hpp"

using namespace covshift;

namespace {

struct KernelArgs {
  std::string family = "gaussian";
  double sigma = 1.0;
  int degree = 3;
  double offset = 1.0;

  void add(CLI::App* app) {
    app->add_option("--kernel", family, "gaussian or polynomial")->check(CLI::IsMember({"gaussian", "polynomial"}));
    app->add_option("--sigma", sigma, "Gaussian kernel bandwidth in exp(-sigma ||x - x'||)");
    app->add_option("--degree", degree, "polynomial degree");
    app->add_option("--offset", offset, "polynomial offset c in (c + x.x')^d");
  }
  KernelSpec spec() const {
    return family == "gaussian" ? KernelSpec::gaussian(sigma) : KernelSpec::polynomial(degree, offset);
  }
};

struct KmmArgs {
  double B = 1000.0;
  std::optional<double> epsilon;
  bool no_band = false;
  double tol = 1e-7;
  int max_iter = 50000;

  void add(CLI::App* app) {
    app->add_option("--B", B, "upper bound on the weights");
    app->add_option("--epsilon", epsilon, "band half-width on mean(beta); default (sqrt(n)-1)/sqrt(n)");
    app->add_flag("--no-band", no_band, "drop the mean(beta) band");
    app->add_option("--qp-tol", tol, "projected-gradient tolerance");
    app->add_option("--qp-max-iter", max_iter, "iteration cap");
  }
  KmmConfig config(const KernelSpec& k) const {
    KmmConfig c;
    c.kernel = k;
    c.B = B;
    c.epsilon = epsilon;
    c.include_band = !no_band;
    c.qp.tol = tol;
    c.qp.max_iter = max_iter;
    c.validate();
    return c;
  }
};

struct RegressorArgs {
  std::string regressor = "kernel_ridge";
  std::string gamma_rule = "ntr";
  double theta = 1.0;
  std::optional<double> gamma;
  double lasso_lambda = 0.1;

  void add(CLI::App* app) {
    app->add_option("--regressor", regressor, "kernel_ridge or lasso")
        ->check(CLI::IsMember({"kernel_ridge", "lasso"}));
    app->add_option("--gamma-rule", gamma_rule, "ridge schedule")->check(CLI::IsMember({"theta", "n", "ntr", "fixed"}));
    app->add_option("--theta", theta, "smoothness knob for the theta rule");
    app->add_option("--gamma", gamma, "ridge value for the fixed rule");
    app->add_option("--lasso-lambda", lasso_lambda, "l1 penalty for the lasso regressor");
  }
  GammaSchedule schedule() const {
    GammaSchedule s;
    s.rule = gamma_rule_from_string(gamma_rule);
    s.theta = theta;
    s.fixed_value = gamma;
    s.validate();
    return s;
  }
};

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-shift correction: KMM weights, robust estimators and ERM"};
  app.require_subcommand(1);

  // weights
  auto* weights = app.add_subcommand("weights", "KMM importance weights for the training rows");
  std::string w_train, w_test, w_out, w_sidecar;
  KernelArgs w_kernel;
  KmmArgs w_kmm;
  weights->add_option("--train", w_train, "training CSV")->required();
  weights->add_option("--test", w_test, "test CSV")->required();
  weights->add_option("--out", w_out, "weights CSV (one per training row)")->required();
  weights->add_option("--json", w_sidecar, "diagnostics JSON (default: <out>.json)");
  w_kernel.add(weights);
  w_kmm.add(weights);

  // estimate
  auto* estimate = app.add_subcommand("estimate", "V_KMM, V_NR and V_R for the test-mean response");
  std::string e_train, e_test, e_out;
  double e_rho = 0.5;
  bool e_split = false;
  KernelArgs e_kernel;
  KmmArgs e_kmm;
  RegressorArgs e_reg;
  estimate->add_option("--train", e_train, "training CSV with y")->required();
  estimate->add_option("--test", e_test, "test CSV")->required();
  estimate->add_option("--out", e_out, "report JSON")->required();
  estimate->add_option("--rho", e_rho, "fraction of training rows that receive weights (split mode)");
  estimate->add_flag("--split", e_split, "fit weights and regression on disjoint parts");
  e_kernel.add(estimate);
  e_kmm.add(estimate);
  e_reg.add(estimate);

  // erm
  auto* erm = app.add_subcommand("erm", "kernel ERM under covariate shift");
  std::string r_mode = "robust", r_loss = "squared", r_train, r_test, r_out, r_predict;
  double r_lambda = 1.0;
  KernelArgs r_kernel;
  KmmArgs r_kmm;
  RegressorArgs r_reg;
  erm->add_option("--mode", r_mode, "robust, kmm or unweighted")->check(CLI::IsMember({"robust", "kmm", "unweighted"}));
  erm->add_option("--loss", r_loss, "squared or logistic")->check(CLI::IsMember({"squared", "logistic"}));
  erm->add_option("--train", r_train, "training CSV with y")->required();
  erm->add_option("--test", r_test, "test CSV")->required();
  erm->add_option("--lambda", r_lambda, "ridge penalty on ||theta||^2");
  erm->add_option("--out", r_out, "fit JSON")->required();
  erm->add_option("--predict", r_predict, "write test predictions to this CSV");
  r_kernel.add(erm);
  r_kmm.add(erm);
  r_reg.add(erm);

  // datagen
  auto* datagen = app.add_subcommand("datagen", "write synthetic or subsampled datasets as CSV");
  std::string d_kind;
  Index d_ntr = 500, d_nte = 500;
  std::uint64_t d_seed = 1;
  std::string d_train_out, d_test_out, d_input;
  double d_noise = -1.0, d_sigma1 = 0.01;
  bool d_test_labels = false;
  datagen->add_option("kind", d_kind, "toy, gaussian10d or biased")
      ->required()
      ->check(CLI::IsMember({"toy", "gaussian10d", "biased"}));
  datagen->add_option("--n-tr", d_ntr, "training rows");
  datagen->add_option("--n-te", d_nte, "test rows");
  datagen->add_option("--seed", d_seed, "seed");
  datagen->add_option("--noise", d_noise, "label noise sd (generator default when omitted)");
  datagen->add_option("--train-out", d_train_out, "training CSV (biased: subsample output)")->required();
  datagen->add_option("--test-out", d_test_out, "test CSV");
  datagen->add_flag("--test-labels", d_test_labels, "include held-out y in the test CSV");
  datagen->add_option("--input", d_input, "biased: training CSV to subsample");
  datagen->add_option("--sigma1", d_sigma1, "biased: selection strength");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run a seeded experiment and write a JSON report");
  std::string x_kind, x_config, x_out, x_csv;
  std::optional<std::uint64_t> x_seed;
  std::optional<int> x_threads;
  bool x_check = false;
  experiment->add_option("kind", x_kind, "toy, table1, uci or rates")
      ->required()
      ->check(CLI::IsMember({"toy", "table1", "uci", "rates"}));
  experiment->add_option("--config", x_config, "config JSON (missing fields take defaults)");
  experiment->add_option("--out", x_out, "report JSON")->required();
  experiment->add_option("--csv", x_csv, "tidy per-replication CSV");
  experiment->add_option("--seed", x_seed, "override base_seed");
  experiment->add_option("--threads", x_threads, "override worker count");
  experiment->add_flag("--check", x_check, "exit with status 2 when a property check fails");

  CLI11_PARSE(app, argc, argv);

  try {
    if (weights->parsed()) {
      const Dataset train = read_dataset_csv(w_train, Role::Train);
      const Dataset test = read_dataset_csv(w_test, Role::Test);
      const ImportanceWeights w = kmm_weights(train, test, w_kmm.config(w_kernel.spec()));
      write_vector_csv(w_out, w.beta, "beta");
      write_json(w_sidecar.empty() ? w_out + ".json" : w_sidecar, w);
      if (!w.converged) std::cerr << "warning: QP did not converge (kkt residual " << w.kkt_residual << ")\n";
      return 0;
    }

    if (estimate->parsed()) {
      const Dataset train = read_dataset_csv(e_train, Role::Train);
      const Dataset test = read_dataset_csv(e_test, Role::Test);
      const SplitPlan plan = make_split_plan(train.rows(), e_rho, !e_split);
      const KernelSpec k = e_kernel.spec();
      const GammaSchedule sched = e_reg.schedule();
      const Index n_nr = static_cast<Index>(plan.nr_indices.size());
      const double gamma = schedule_gamma(sched, n_nr, test.rows());
      RegressorFitter fitter;
      if (e_reg.regressor == "lasso")
        fitter = [&](const Matrix& X, const Vector& y) { return fit_lasso_linear(X, y, e_reg.lasso_lambda).as_predictor(); };
      else
        fitter = [&](const Matrix& X, const Vector& y) { return fit_kernel_ridge(X, y, gamma, k).as_predictor(); };
      EstimateReport rep = estimate_v_r(train, test, plan, e_kmm.config(k), fitter);
      if (e_reg.regressor != "lasso") rep.gamma = gamma;
      write_json(e_out, rep);
      return 0;
    }

    if (erm->parsed()) {
      const Dataset train = read_dataset_csv(r_train, Role::Train);
      const Dataset test = read_dataset_csv(r_test, Role::Test);
      const KernelSpec k = r_kernel.spec();
      const ErmMode mode = erm_mode_from_string(r_mode);
      const ErmLoss loss = erm_loss_from_string(r_loss);
      const Vector& y = train.labels();
      const double gamma = schedule_gamma(r_reg.schedule(), train.rows(), test.rows());
      const Predictor g = r_reg.regressor == "lasso" ? fit_lasso_linear(train.X, y, r_reg.lasso_lambda).as_predictor()
                                                     : fit_kernel_ridge(train.X, y, gamma, k).as_predictor();
      ErmFit fit;
      if (mode == ErmMode::UnweightedNr) {
        fit = fit_unweighted_nr_erm(test.X, g, r_lambda, k, loss);
      } else {
        const Vector beta = kmm_weights(train, test, r_kmm.config(k)).beta;
        if (mode == ErmMode::Robust)
          fit = loss == ErmLoss::Squared ? fit_robust_least_squares(train.X, y, test.X, beta, g, r_lambda, k)
                                         : fit_robust_logistic(train.X, y, test.X, beta, g, r_lambda, k);
        else
          fit = loss == ErmLoss::Squared ? fit_kmm_weighted_ridge(train.X, y, beta, r_lambda, k, test.rows())
                                         : fit_kmm_weighted_logistic(train.X, y, beta, r_lambda, k);
      }
      write_json(r_out, fit);
      if (!r_predict.empty()) {
        const Vector score = predict_erm(fit, test.X);
        const Vector label = classify_erm(fit, test.X);
        std::ofstream out(r_predict);
        if (!out) throw std::runtime_error("cannot open " + r_predict + " for writing");
        out << "score,label\n";
        for (Index i = 0; i < score.size(); ++i) out << format_double(score(i)) << ',' << label(i) << '\n';
      }
      return 0;
    }

    if (datagen->parsed()) {
      if (d_kind == "biased") {
        if (d_input.empty()) throw std::invalid_argument("datagen biased: --input is required");
        write_dataset_csv(d_train_out, biased_subsample(read_dataset_csv(d_input, Role::Train), d_sigma1, d_seed));
        return 0;
      }
      if (d_test_out.empty()) throw std::invalid_argument("datagen: --test-out is required");
      Dataset train, test;
      Vector test_labels;
      if (d_kind == "toy") {
        ToyData d = gen_toy1d(d_ntr, d_nte, d_seed, d_noise >= 0.0 ? d_noise : 0.3);
        train = std::move(d.train);
        test = std::move(d.test);
        test_labels = std::move(d.test_labels);
      } else {
        ShiftProblemParams params;
        if (d_noise >= 0.0) params.noise_sd = d_noise;
        const ShiftProblem problem = draw_shift_problem(params, mix_seed(d_seed, 0));
        ShiftSample s = sample_shift_problem(problem, d_ntr, d_nte, mix_seed(d_seed, 1));
        train = std::move(s.train);
        test = std::move(s.test);
        test_labels = std::move(s.test_labels);
        std::cerr << "nu_oracle " << format_double(oracle_mean(problem, 100000, mix_seed(d_seed, 2))) << '\n';
      }
      if (d_test_labels) {
        test.y = test_labels;
        test.heldout_labels = true;
      }
      write_dataset_csv(d_train_out, train);
      write_dataset_csv(d_test_out, test);
      return 0;
    }

    if (experiment->parsed()) {
      const json cfg_json = x_config.empty() ? json::object() : read_json(x_config);
      ExperimentReport rep;
      auto apply = [&](auto& cfg) {
        cfg_json.get_to(cfg);
        if (x_seed) cfg.base_seed = *x_seed;
        if (x_threads) cfg.threads = *x_threads;
      };
      if (x_kind == "toy") {
        ToyConfig cfg;
        apply(cfg);
        rep = run_toy_experiment(cfg);
      } else if (x_kind == "table1") {
        Table1Config cfg;
        apply(cfg);
        rep = run_table1(cfg);
      } else if (x_kind == "uci") {
        UciConfig cfg;
        apply(cfg);
        rep = run_uci_experiment(cfg);
      } else {
        RateConfig cfg;
        apply(cfg);
        rep = run_rate_sweep(cfg);
      }
      write_json(x_out, report_to_json(rep));
      if (!x_csv.empty()) write_records_csv(x_csv, rep);
      for (const auto& c : rep.checks)
        std::cout << (c.passed ? "ok   " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")")
                  << '\n';
      if (x_check && !rep.all_checks_passed()) return 2;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
