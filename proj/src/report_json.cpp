#include "calibkit/report_json.hpp"

#include "calibkit/error.hpp"

namespace calibkit {

nlohmann::ordered_json binning_to_json(const BinningConfig& binning) {
  nlohmann::ordered_json j;
  j["strategy"] = std::string(to_string(binning.strategy));
  j["alpha"] = binning.alpha;
  j["epsilon"] = binning.epsilon;
  j["z_score"] = binning.z_score();
  j["bin_capacity"] = binning.adaptive_bin_size();
  j["fixed_bin_count"] = binning.fixed_bin_count;
  return j;
}

nlohmann::ordered_json report_to_json(const CalibrationReport& report) {
  nlohmann::ordered_json j;
  j["level"] = std::string(to_string(report.level));
  j["total_samples"] = report.total_samples;
  j["overall_accuracy"] = report.overall_accuracy;
  j["ece"] = report.ece;
  j["binning"] = binning_to_json(report.binning);
  auto bins = nlohmann::ordered_json::array();
  for (const auto& b : report.bins) {
    nlohmann::ordered_json bj;
    bj["sample_count"] = b.sample_count;
    bj["mean_confidence"] = b.mean_confidence;
    bj["mean_accuracy"] = b.mean_accuracy;
    bj["confidence_lo"] = b.confidence_lo;
    bj["confidence_hi"] = b.confidence_hi;
    bins.push_back(std::move(bj));
  }
  j["bins"] = std::move(bins);
  return j;
}

CalibrationReport report_from_json(const nlohmann::json& j) {
  try {
    CalibrationReport report;
    const auto level = j.at("level").get<std::string>();
    if (level == "token")
      report.level = ReportLevel::kToken;
    else if (level == "sequence")
      report.level = ReportLevel::kSequence;
    else
      throw ValidationError("report: unknown level '" + level + "'");
    report.total_samples = j.at("total_samples").get<std::size_t>();
    report.overall_accuracy = j.at("overall_accuracy").get<double>();
    report.ece = j.at("ece").get<double>();
    const auto& b = j.at("binning");
    report.binning.strategy = parse_binning_strategy(b.at("strategy").get<std::string>());
    report.binning.alpha = b.at("alpha").get<double>();
    report.binning.epsilon = b.at("epsilon").get<double>();
    report.binning.fixed_bin_count = b.at("fixed_bin_count").get<std::size_t>();
    for (const auto& bj : j.at("bins")) {
      CalibrationBin bin;
      bin.sample_count = bj.at("sample_count").get<std::size_t>();
      bin.mean_confidence = bj.at("mean_confidence").get<double>();
      bin.mean_accuracy = bj.at("mean_accuracy").get<double>();
      bin.confidence_lo = bj.at("confidence_lo").get<double>();
      bin.confidence_hi = bj.at("confidence_hi").get<double>();
      report.bins.push_back(bin);
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report JSON: ") + e.what());
  }
}

}  // namespace calibkit
