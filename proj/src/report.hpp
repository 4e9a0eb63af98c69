#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "activation.hpp"
#include "delta.hpp"
#include "mso.hpp"
#include "scheme.hpp"
#include "synth.hpp"

namespace sspace {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchema = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest decimal that round-trips to the same double.
std::string format_number(double value);

Json projection_report_json(const ProjectionReport& report);
/// One JSON document with a "runs" array and one CSV for several rho values / schemes.
Json projection_runs_json(const std::vector<ProjectionReport>& runs, bool energy_only);
std::string projection_runs_csv(const std::vector<ProjectionReport>& runs, bool energy_only);

Json pairwise_report_json(const PairwiseReport& report);
std::string pairwise_report_csv(const PairwiseReport& report);

Json activation_report_json(const ActivationMsoReport& report);
std::string activation_report_csv(const ActivationMsoReport& report);

/// Per-tensor shape, dtype and Frobenius norm of a delta.
Json delta_summary_json(const DeltaModel& delta);
std::string delta_summary_csv(const DeltaModel& delta);

Json synth_truth_json(const SynthModel& model);
std::string synth_truth_csv(const SynthModel& model);

}  // namespace sspace
