#include "calibkit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "calibkit/error.hpp"

namespace calibkit {

LineFit weighted_least_squares(std::span<const double> x, std::span<const double> y,
                               std::span<const double> weights) {
  if (x.size() != y.size() || x.size() != weights.size())
    throw Error("least squares inputs differ in length");
  double w_sum = 0.0;
  double x_mean = 0.0;
  double y_mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    w_sum += weights[i];
    x_mean += weights[i] * x[i];
    y_mean += weights[i] * y[i];
  }
  if (!(w_sum > 0.0)) throw Error("least squares needs positive total weight");
  x_mean /= w_sum;
  y_mean /= w_sum;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - x_mean;
    sxx += weights[i] * dx * dx;
    sxy += weights[i] * dx * (y[i] - y_mean);
  }
  if (!(sxx > 0.0)) throw Error("slope undefined: all perplexities coincide");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  return fit;
}

CouplingReport coupling_from_points(std::span<const CouplingPoint> points,
                                    const BinningConfig& binning,
                                    const CouplingOptions& options) {
  CouplingReport report;
  report.per_example_regression = options.per_example_regression;

  std::vector<CouplingPoint> kept;
  kept.reserve(points.size());
  for (const auto& p : points) {
    if (options.perplexity_cap && p.perplexity > *options.perplexity_cap) {
      ++report.excluded_by_cap;
      continue;
    }
    kept.push_back(p);
  }
  if (kept.empty()) throw Error("coupling analysis has no examples");

  std::vector<Sample> samples;
  samples.reserve(kept.size());
  for (const auto& p : kept) samples.push_back({p.confidence, p.correct, p.example_id, 0, {}});
  const auto groups = partition_samples(samples, binning);
  if (groups.size() < 2)
    throw Error("coupling analysis needs at least two confidence bins, got " +
                std::to_string(groups.size()));

  for (const auto& group : groups) {
    CouplingBin bin;
    bin.sample_count = group.indices.size();
    for (std::size_t i : group.indices) {
      bin.mean_perplexity += kept[i].perplexity;
      bin.mean_confidence += kept[i].confidence;
      bin.mean_accuracy += kept[i].correct ? 1.0 : 0.0;
    }
    const auto n = static_cast<double>(bin.sample_count);
    bin.mean_perplexity /= n;
    bin.mean_confidence /= n;
    bin.mean_accuracy /= n;
    report.bins.push_back(bin);
  }

  std::vector<double> x;
  std::vector<double> conf;
  std::vector<double> acc;
  std::vector<double> w;
  if (options.per_example_regression) {
    for (const auto& p : kept) {
      x.push_back(p.perplexity);
      conf.push_back(p.confidence);
      acc.push_back(p.correct ? 1.0 : 0.0);
      w.push_back(1.0);
    }
  } else {
    for (const auto& b : report.bins) {
      x.push_back(b.mean_perplexity);
      conf.push_back(b.mean_confidence);
      acc.push_back(b.mean_accuracy);
      w.push_back(static_cast<double>(b.sample_count));
    }
  }
  report.slope_confidence = weighted_least_squares(x, conf, w).slope;
  report.slope_accuracy = weighted_least_squares(x, acc, w).slope;
  report.coupling_gap = std::abs(report.slope_confidence - report.slope_accuracy);
  return report;
}

std::string input_text(const PredictionRecord& record) {
  std::string out;
  for (const auto& part : record.input_context) {
    if (!out.empty()) out.push_back(' ');
    out += part;
  }
  return out;
}

CouplingReport coupling_analysis(std::span<const PredictionRecord> records,
                                 const PerplexitySource& source, const BinningConfig& binning,
                                 const ScoringOptions& scoring, const CouplingOptions& options) {
  std::vector<CouplingPoint> points;
  points.reserve(records.size());
  for (const auto& rec : records) {
    CouplingPoint p;
    if (source.model) {
      p.perplexity = source.model->perplexity(input_text(rec));
    } else if (rec.input_perplexity) {
      p.perplexity = *rec.input_perplexity;
    } else {
      throw ValidationError("example '" + rec.example_id +
                            "' has no input_perplexity and no language model was given");
    }
    p.confidence = sequence_confidence(rec, Aggregation::kMin);
    p.correct =
        exact_match(rec.predicted_program, rec.gold_program, scoring.dialect, scoring.normalization);
    p.example_id = rec.example_id;
    points.push_back(std::move(p));
  }
  return coupling_from_points(points, binning, options);
}

nlohmann::ordered_json coupling_to_json(const CouplingReport& report) {
  nlohmann::ordered_json j;
  j["slope_confidence"] = report.slope_confidence;
  j["slope_accuracy"] = report.slope_accuracy;
  j["coupling_gap"] = report.coupling_gap;
  j["per_example_regression"] = report.per_example_regression;
  j["excluded_by_cap"] = report.excluded_by_cap;
  auto bins = nlohmann::ordered_json::array();
  for (const auto& b : report.bins) {
    nlohmann::ordered_json bj;
    bj["mean_perplexity"] = b.mean_perplexity;
    bj["mean_confidence"] = b.mean_confidence;
    bj["mean_accuracy"] = b.mean_accuracy;
    bj["sample_count"] = b.sample_count;
    bins.push_back(std::move(bj));
  }
  j["bins"] = std::move(bins);
  return j;
}

std::map<std::string, StratumResult> stratified_ece(std::span<const PredictionRecord> records,
                                                    Aggregation method,
                                                    const BinningConfig& binning,
                                                    const ScoringOptions& scoring) {
  std::map<std::string, std::vector<PredictionRecord>> groups;
  std::vector<std::string> missing;
  for (const auto& rec : records) {
    if (!rec.difficulty) {
      missing.push_back(rec.example_id);
      continue;
    }
    groups[*rec.difficulty].push_back(rec);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ... (" + std::to_string(missing.size()) + " total)";
    throw ValidationError("difficulty label missing for: " + list);
  }
  if (groups.empty()) throw ValidationError("no records to stratify");

  std::map<std::string, StratumResult> out;
  for (const auto& [label, members] : groups) {
    StratumResult result;
    result.report = sequence_level_report(members, method, binning, scoring);
    result.ece = result.report.ece;
    result.accuracy = result.report.overall_accuracy;
    result.count = result.report.total_samples;
    result.single_bin_fallback = binning.strategy == BinningStrategy::kAdaptive &&
                                 result.count < binning.adaptive_bin_size();
    out.emplace(label, std::move(result));
  }
  return out;
}

nlohmann::ordered_json strata_to_json(const std::map<std::string, StratumResult>& strata) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [label, s] : strata) {
    nlohmann::ordered_json sj;
    sj["ece"] = s.ece;
    sj["accuracy"] = s.accuracy;
    sj["count"] = s.count;
    sj["single_bin_fallback"] = s.single_bin_fallback;
    sj["bin_count"] = s.report.bins.size();
    j[label] = std::move(sj);
  }
  return j;
}

std::vector<ParetoEntry> pareto_table(std::span<const ParetoEntry> entries) {
  std::vector<ParetoEntry> table(entries.begin(), entries.end());
  for (auto& candidate : table) {
    candidate.on_front = std::none_of(entries.begin(), entries.end(), [&](const ParetoEntry& other) {
      const bool weakly = other.overall_accuracy >= candidate.overall_accuracy &&
                          other.ece <= candidate.ece;
      const bool strictly = other.overall_accuracy > candidate.overall_accuracy ||
                            other.ece < candidate.ece;
      return weakly && strictly;
    });
  }
  std::sort(table.begin(), table.end(), [](const ParetoEntry& a, const ParetoEntry& b) {
    return std::tie(b.overall_accuracy, a.ece, a.model_id) <
           std::tie(a.overall_accuracy, b.ece, b.model_id);
  });
  return table;
}

nlohmann::ordered_json pareto_to_json(std::span<const ParetoEntry> table) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : table) {
    nlohmann::ordered_json j;
    j["model_id"] = e.model_id;
    j["overall_accuracy"] = e.overall_accuracy;
    j["ece"] = e.ece;
    j["on_front"] = e.on_front;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace calibkit
