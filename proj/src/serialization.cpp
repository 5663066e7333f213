#include "covshift/serialization.hpp"

namespace covshift {

json vector_to_json(const Vector& v) {
  json j = json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

json matrix_to_json(const Matrix& m) {
  json j = json::array();
  for (Index i = 0; i < m.rows(); ++i) j.push_back(vector_to_json(m.row(i).transpose()));
  return j;
}

Matrix matrix_from_json(const json& j) {
  if (j.empty()) return Matrix(0, 0);
  const auto cols = static_cast<Index>(j[0].size());
  Matrix m(static_cast<Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (static_cast<Index>(j[i].size()) != cols) throw DimensionMismatch("matrix_from_json: ragged rows");
    for (Index c = 0; c < cols; ++c) m(static_cast<Index>(i), c) = j[i][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

void to_json(json& j, const KernelSpec& k) {
  j = json{{"family", to_string(k.family)}};
  if (k.family == KernelFamily::Gaussian) {
    j["sigma"] = k.sigma;
  } else {
    j["degree"] = k.degree;
    j["offset"] = k.offset;
  }
}

void from_json(const json& j, KernelSpec& k) {
  k = KernelSpec{};
  k.family = kernel_family_from_string(j.at("family").get<std::string>());
  if (j.contains("sigma")) k.sigma = j["sigma"].get<double>();
  if (j.contains("degree")) k.degree = j["degree"].get<int>();
  if (j.contains("offset")) k.offset = j["offset"].get<double>();
  k.validate();
}

void to_json(json& j, const GammaSchedule& s) {
  j = json{{"rule", to_string(s.rule)}, {"theta", s.theta}};
  if (s.fixed_value) j["fixed_value"] = *s.fixed_value;
}

void from_json(const json& j, GammaSchedule& s) {
  s = GammaSchedule{};
  if (j.contains("rule")) s.rule = gamma_rule_from_string(j["rule"].get<std::string>());
  if (j.contains("theta")) s.theta = j["theta"].get<double>();
  if (j.contains("fixed_value")) s.fixed_value = j["fixed_value"].get<double>();
  s.validate();
}

void to_json(json& j, const KernelRidgeModel& m) {
  j = json{{"gamma", m.gamma},
           {"kernel", m.kernel},
           {"alpha", vector_to_json(m.alpha)},
           {"anchors", matrix_to_json(m.anchors)}};
}

void from_json(const json& j, KernelRidgeModel& m) {
  m.gamma = j.at("gamma").get<double>();
  m.kernel = j.at("kernel").get<KernelSpec>();
  m.alpha = vector_from_json(j.at("alpha"));
  m.anchors = matrix_from_json(j.at("anchors"));
  if (m.anchors.rows() != m.alpha.size()) throw DimensionMismatch("ridge model: alpha and anchors differ in length");
}

void to_json(json& j, const ImportanceWeights& w) {
  j = json{{"l_hat", w.l_hat},         {"kkt_residual", w.kkt_residual}, {"mean_beta", w.mean_beta},
           {"B", w.B},                 {"epsilon", w.epsilon},           {"band", w.band},
           {"iterations", w.iterations}, {"converged", w.converged}};
}

void to_json(json& j, const EstimateReport& r) {
  j = json{{"v_kmm", r.v_kmm},
           {"v_nr", r.v_nr},
           {"v_r", r.v_r},
           {"residual_term", r.residual_term},
           {"plugin_term", r.plugin_term},
           {"n_kmm", r.n_kmm},
           {"n_nr", r.n_nr},
           {"n_te", r.n_te}};
  j["gamma"] = r.gamma ? json(*r.gamma) : json(nullptr);
  j["weights"] = r.weights ? json(*r.weights) : json(nullptr);
}

void to_json(json& j, const ErmFit& f) {
  j = json{{"loss", to_string(f.loss)},
           {"mode", to_string(f.mode)},
           {"lambda", f.lambda},
           {"kernel", f.kernel},
           {"objective", f.objective},
           {"grad_norm", f.grad_norm},
           {"iterations", f.iterations},
           {"converged", f.converged},
           {"n_train_block", f.n_train_block},
           {"n_test_block", f.n_test_block},
           {"alpha", vector_to_json(f.alpha)},
           {"span", matrix_to_json(f.span)}};
}

void from_json(const json& j, ErmFit& f) {
  f = ErmFit{};
  f.loss = erm_loss_from_string(j.at("loss").get<std::string>());
  f.mode = erm_mode_from_string(j.at("mode").get<std::string>());
  f.lambda = j.at("lambda").get<double>();
  f.kernel = j.at("kernel").get<KernelSpec>();
  f.objective = j.value("objective", 0.0);
  f.grad_norm = j.value("grad_norm", 0.0);
  f.iterations = j.value("iterations", 0);
  f.converged = j.value("converged", true);
  f.n_train_block = j.value("n_train_block", Index{0});
  f.n_test_block = j.value("n_test_block", Index{0});
  f.alpha = vector_from_json(j.at("alpha"));
  f.span = matrix_from_json(j.at("span"));
  if (f.span.rows() != f.alpha.size()) throw DimensionMismatch("erm fit: alpha and span differ in length");
}

}  // namespace covshift
