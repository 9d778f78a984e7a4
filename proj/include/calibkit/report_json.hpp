#pragma once

#include "json.hpp"

#include "calibkit/calibration_metrics.hpp"

namespace calibkit {

// Stable key order: level, total_samples, overall_accuracy, ece, binning, bins.
nlohmann::ordered_json report_to_json(const CalibrationReport& report);
nlohmann::ordered_json binning_to_json(const BinningConfig& binning);

// Inverse of report_to_json; throws ValidationError on missing or mistyped keys.
CalibrationReport report_from_json(const nlohmann::json& j);

}  // namespace calibkit
