#pragma once

#include <json.hpp>

#include "covshift/erm.hpp"
#include "covshift/estimators.hpp"
#include "covshift/kernels.hpp"
#include "covshift/kmm.hpp"
#include "covshift/ridge.hpp"

namespace covshift {

using nlohmann::json;

json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);
/// Row-major array of arrays.
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

void to_json(json& j, const KernelSpec& k);
void from_json(const json& j, KernelSpec& k);

void to_json(json& j, const GammaSchedule& s);
void from_json(const json& j, GammaSchedule& s);

/// {gamma, alpha[], anchors[][], kernel}
void to_json(json& j, const KernelRidgeModel& m);
void from_json(const json& j, KernelRidgeModel& m);

void to_json(json& j, const ImportanceWeights& w);
void to_json(json& j, const EstimateReport& r);

void to_json(json& j, const ErmFit& f);
void from_json(const json& j, ErmFit& f);

}  // namespace covshift
