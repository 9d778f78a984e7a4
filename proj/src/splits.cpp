#include "calibkit/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "calibkit/error.hpp"

namespace calibkit {
namespace {

std::set<std::string> id_set(const PredictionLog& log) {
  std::set<std::string> ids;
  for (const auto& r : log.records) ids.insert(r.example_id);
  return ids;
}

std::optional<double> percent_correct(const std::vector<bool>& outcomes) {
  if (outcomes.empty()) return std::nullopt;
  const auto correct = std::count(outcomes.begin(), outcomes.end(), true);
  return 100.0 * static_cast<double>(correct) / static_cast<double>(outcomes.size());
}

nlohmann::ordered_json sorted_array(const std::set<std::string>& ids) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& id : ids) arr.push_back(id);
  return arr;
}

std::set<std::string> read_id_array(const nlohmann::json& arr, const std::string& field) {
  if (!arr.is_array()) throw ValidationError("manifest: '" + field + "' must be an array");
  std::set<std::string> ids;
  for (const auto& v : arr) {
    if (!v.is_string()) throw ValidationError("manifest: '" + field + "' holds a non-string id");
    if (!ids.insert(v.get<std::string>()).second)
      throw ValidationError("manifest: duplicate id '" + v.get<std::string>() + "' in '" + field +
                            "'");
  }
  return ids;
}

}  // namespace

double linear_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) throw Error("percentile of an empty pool");
  if (!(percentile > 0.0 && percentile < 100.0))
    throw Error("percentile must lie in (0, 100)");
  std::sort(values.begin(), values.end());
  const double position = percentile / 100.0 * static_cast<double>(values.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(position));
  const std::size_t upper = std::min(lower + 1, values.size() - 1);
  const double fraction = position - static_cast<double>(lower);
  return values[lower] + fraction * (values[upper] - values[lower]);
}

void require_aligned_logs(std::span<const PredictionLog> logs) {
  if (logs.empty()) throw ValidationError("no logs given");
  std::set<std::string> models;
  for (const auto& log : logs) {
    if (!models.insert(log.model_id()).second)
      throw ValidationError("model '" + log.model_id() + "' appears in more than one log");
    const auto report = validate_pair(logs.front().records, log.records);
    if (!report.aligned())
      throw ValidationError("log for model '" + log.model_id() + "' is not aligned with '" +
                            logs.front().model_id() + "': " +
                            std::to_string(report.only_in_a.size()) + " and " +
                            std::to_string(report.only_in_b.size()) + " unmatched example ids");
  }
}

double pooled_threshold(std::span<const PredictionLog> logs, double percentile) {
  require_aligned_logs(logs);
  std::vector<double> pool;
  for (const auto& log : logs)
    for (const auto& rec : log.records) pool.push_back(sequence_confidence(rec, Aggregation::kMin));
  return linear_percentile(std::move(pool), percentile);
}

SplitManifest extract_splits(std::span<const PredictionLog> logs, double threshold,
                             double percentile) {
  require_aligned_logs(logs);
  SplitManifest manifest;
  manifest.dataset_id = logs.front().dataset_id();
  manifest.threshold = threshold;
  manifest.percentile = percentile;
  for (const auto& log : logs) {
    const std::string model = log.model_id();
    manifest.model_ids.push_back(model);
    auto& hard = manifest.per_model_hard[model];
    for (const auto& rec : log.records)
      if (sequence_confidence(rec, Aggregation::kMin) < threshold) hard.insert(rec.example_id);
    manifest.hard_ids.insert(hard.begin(), hard.end());
  }
  for (const auto& id : id_set(logs.front()))
    if (!manifest.hard_ids.contains(id)) manifest.easy_ids.insert(id);
  return manifest;
}

SplitManifest build_splits(std::span<const PredictionLog> logs, double percentile) {
  return extract_splits(logs, pooled_threshold(logs, percentile), percentile);
}

void check_manifest(const SplitManifest& m) {
  for (const auto& id : m.hard_ids)
    if (m.easy_ids.contains(id))
      throw ValidationError("manifest: id '" + id + "' is both EASY and HARD");
  std::set<std::string> union_ids;
  for (const auto& [model, ids] : m.per_model_hard) {
    if (std::find(m.model_ids.begin(), m.model_ids.end(), model) == m.model_ids.end())
      throw ValidationError("manifest: per_model_hard names unknown model '" + model + "'");
    union_ids.insert(ids.begin(), ids.end());
  }
  if (union_ids != m.hard_ids)
    throw ValidationError("manifest: hard_ids is not the union of per_model_hard");
  if (!(m.percentile > 0.0 && m.percentile < 100.0))
    throw ValidationError("manifest: percentile must lie in (0, 100)");
}

std::vector<ModelSplitStats> split_report(const SplitManifest& manifest,
                                          std::span<const PredictionLog> logs,
                                          const ScoringOptions& scoring) {
  check_manifest(manifest);
  std::set<std::string> all_ids = manifest.easy_ids;
  all_ids.insert(manifest.hard_ids.begin(), manifest.hard_ids.end());
  std::vector<ModelSplitStats> out;
  for (const auto& log : logs) {
    const std::string model = log.model_id();
    if (id_set(log) != all_ids)
      throw ValidationError("log for model '" + model + "' does not cover the manifest's ids");
    std::vector<bool> easy;
    std::vector<bool> hard;
    for (const auto& rec : log.records) {
      const bool ok = exact_match(rec.predicted_program, rec.gold_program, scoring.dialect,
                                  scoring.normalization);
      (manifest.hard_ids.contains(rec.example_id) ? hard : easy).push_back(ok);
    }
    ModelSplitStats stats;
    stats.model_id = model;
    stats.easy_accuracy = percent_correct(easy);
    stats.hard_accuracy = percent_correct(hard);
    if (auto it = manifest.per_model_hard.find(model); it != manifest.per_model_hard.end())
      stats.hard_count = it->second.size();
    stats.hard_percentage =
        all_ids.empty() ? 0.0
                        : 100.0 * static_cast<double>(stats.hard_count) /
                              static_cast<double>(all_ids.size());
    out.push_back(std::move(stats));
  }
  return out;
}

nlohmann::ordered_json manifest_to_json(const SplitManifest& m) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["dataset_id"] = m.dataset_id;
  j["percentile"] = m.percentile;
  j["percentile_method"] = "linear";
  j["threshold"] = m.threshold;
  j["model_ids"] = m.model_ids;
  j["hard_ids"] = sorted_array(m.hard_ids);
  j["easy_ids"] = sorted_array(m.easy_ids);
  nlohmann::ordered_json per_model = nlohmann::ordered_json::object();
  for (const auto& [model, ids] : m.per_model_hard) per_model[model] = sorted_array(ids);
  j["per_model_hard"] = std::move(per_model);
  return j;
}

SplitManifest manifest_from_json(const nlohmann::json& j) {
  SplitManifest m;
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion)
      throw ValidationError("manifest: unsupported schema_version");
    if (j.at("percentile_method").get<std::string>() != "linear")
      throw ValidationError("manifest: unsupported percentile_method");
    m.dataset_id = j.at("dataset_id").get<std::string>();
    m.percentile = j.at("percentile").get<double>();
    m.threshold = j.at("threshold").get<double>();
    m.model_ids = j.at("model_ids").get<std::vector<std::string>>();
    m.hard_ids = read_id_array(j.at("hard_ids"), "hard_ids");
    m.easy_ids = read_id_array(j.at("easy_ids"), "easy_ids");
    for (const auto& [model, ids] : j.at("per_model_hard").items())
      m.per_model_hard[model] = read_id_array(ids, "per_model_hard." + model);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  check_manifest(m);
  return m;
}

nlohmann::ordered_json split_report_to_json(std::span<const ModelSplitStats> stats) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : stats) {
    nlohmann::ordered_json j;
    j["model_id"] = s.model_id;
    j["hard_percentage"] = s.hard_percentage;
    j["hard_count"] = s.hard_count;
    j["easy_accuracy"] = s.easy_accuracy ? nlohmann::ordered_json(*s.easy_accuracy) : nullptr;
    j["hard_accuracy"] = s.hard_accuracy ? nlohmann::ordered_json(*s.hard_accuracy) : nullptr;
    arr.push_back(std::move(j));
  }
  return arr;
}

void write_manifest(const SplitManifest& manifest, const std::filesystem::path& path) {
  check_manifest(manifest);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << manifest_to_json(manifest).dump(2) << "\n";
  if (!out) throw IoError("failed writing manifest '" + path.string() + "'");
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace calibkit
