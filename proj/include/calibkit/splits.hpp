#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "calibkit/calibration_metrics.hpp"
#include "calibkit/prediction_log.hpp"

namespace calibkit {

// Confidence-based EASY/HARD partition of one dataset's test set. An example
// is HARD when any model's min-aggregated sequence confidence is strictly
// below the threshold.
struct SplitManifest {
  std::string dataset_id;
  double threshold = 0.0;
  double percentile = 25.0;
  std::vector<std::string> model_ids;
  std::set<std::string> hard_ids;
  std::set<std::string> easy_ids;
  std::map<std::string, std::set<std::string>> per_model_hard;

  bool operator==(const SplitManifest&) const = default;
};

// Linear interpolation between order statistics: position p/100 * (n - 1).
double linear_percentile(std::vector<double> values, double percentile);

// Throws ValidationError unless all logs share the dataset and example ids and
// come from distinct models.
void require_aligned_logs(std::span<const PredictionLog> logs);

// Percentile of the pooled min-aggregated sequence confidences of all models.
double pooled_threshold(std::span<const PredictionLog> logs, double percentile = 25.0);

SplitManifest extract_splits(std::span<const PredictionLog> logs, double threshold,
                             double percentile = 25.0);

// pooled_threshold followed by extract_splits.
SplitManifest build_splits(std::span<const PredictionLog> logs, double percentile = 25.0);

// Throws ValidationError when HARD/EASY overlap or HARD is not the union of
// the per-model sets.
void check_manifest(const SplitManifest& manifest);

struct ModelSplitStats {
  std::string model_id;
  // Exact-match accuracy in percent; empty when the subset is empty.
  std::optional<double> easy_accuracy;
  std::optional<double> hard_accuracy;
  // |per_model_hard| / |examples| in percent.
  double hard_percentage = 0.0;
  std::size_t hard_count = 0;
};

std::vector<ModelSplitStats> split_report(const SplitManifest& manifest,
                                          std::span<const PredictionLog> logs,
                                          const ScoringOptions& scoring = {});

nlohmann::ordered_json manifest_to_json(const SplitManifest& manifest);
SplitManifest manifest_from_json(const nlohmann::json& j);
nlohmann::ordered_json split_report_to_json(std::span<const ModelSplitStats> stats);

void write_manifest(const SplitManifest& manifest, const std::filesystem::path& path);
SplitManifest read_manifest(const std::filesystem::path& path);

}  // namespace calibkit
