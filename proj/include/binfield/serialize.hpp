#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "binfield/analysis.hpp"
#include "binfield/basis.hpp"
#include "binfield/estimator.hpp"
#include "binfield/field.hpp"
#include "binfield/sensing.hpp"

namespace binfield {

using json = nlohmann::ordered_json;

/// Malformed JSON description of a model object. `path` locates the offending
/// member, e.g. "field.params.at".
class SchemaError : public std::invalid_argument {
public:
    SchemaError(std::string path, const std::string& what)
        : std::invalid_argument(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

json basis_to_json(const Basis& basis);
Basis basis_from_json(const json& j, const std::string& path = "basis");

/// {class, params, a, coefficients?}
json field_to_json(const FieldSpec& field);
FieldSpec field_from_json(const json& j, const std::string& path = "field");

json density_to_json(const DeploymentDensity& deploy);
DeploymentDensity density_from_json(const json& j, const std::string& path = "deployment");

json noise_to_json(const NoiseModel& noise);
NoiseModel noise_from_json(const json& j, const std::string& path = "noise");

json schedule_to_json(const Schedule& schedule);
Schedule schedule_from_json(const json& j, const std::string& path = "schedule");

json complex_array_to_json(std::span<const cplx> values);
std::vector<cplx> complex_array_from_json(const json& j, const std::string& path);

json coefficients_to_json(const ReconstructionCoefficients& coeffs);
ReconstructionCoefficients coefficients_from_json(const json& j);

json bound_report_to_json(const BoundReport& report);
json rate_fit_to_json(const RateFitResult& fit);
json schedule_validation_to_json(const ScheduleValidation& v);
json trace_to_json(const ASTraceResult& trace);
json consistency_to_json(const ConsistencyReport& report);

} // namespace binfield
