#include "calibkit/calibration_metrics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "calibkit/error.hpp"

namespace calibkit {
namespace {

bool sample_less(const Sample& a, const Sample& b) {
  if (a.confidence != b.confidence) return a.confidence < b.confidence;
  if (a.example_id != b.example_id) return a.example_id < b.example_id;
  return a.position < b.position;
}

void check_samples(std::span<const Sample> samples) {
  if (samples.empty()) throw Error("cannot bin an empty sample set");
  for (const auto& s : samples)
    if (!(s.confidence >= 0.0 && s.confidence <= 1.0))
      throw ValidationError("sample confidence " + std::to_string(s.confidence) +
                            " is outside [0, 1] (example '" + s.example_id + "')");
}

std::vector<std::size_t> sorted_order(std::span<const Sample> samples) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sample_less(samples[a], samples[b]);
  });
  return order;
}

std::vector<BinMembers> adaptive_partition(std::span<const Sample> samples,
                                           const BinningConfig& config) {
  check_samples(samples);
  const std::size_t capacity = config.adaptive_bin_size();
  const auto order = sorted_order(samples);
  const std::size_t total = order.size();

  std::vector<std::size_t> bounds;  // start offset of every bin, then total
  const std::size_t full = total / capacity;
  const std::size_t remainder = total % capacity;
  for (std::size_t b = 0; b < full; ++b) bounds.push_back(b * capacity);
  if (full == 0 || (remainder > 0 && 2 * remainder >= capacity)) bounds.push_back(full * capacity);
  bounds.push_back(total);

  std::vector<BinMembers> bins;
  bins.reserve(bounds.size() - 1);
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    BinMembers bin;
    bin.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(bounds[b]),
                       order.begin() + static_cast<std::ptrdiff_t>(bounds[b + 1]));
    bin.confidence_lo = samples[bin.indices.front()].confidence;
    bin.confidence_hi = samples[bin.indices.back()].confidence;
    bins.push_back(std::move(bin));
  }
  return bins;
}

std::vector<BinMembers> fixed_partition(std::span<const Sample> samples,
                                        const BinningConfig& config) {
  check_samples(samples);
  config.validate();
  const std::size_t count = config.fixed_bin_count;
  std::vector<BinMembers> buckets(count);
  for (std::size_t b = 0; b < count; ++b) {
    buckets[b].confidence_lo = static_cast<double>(b) / static_cast<double>(count);
    buckets[b].confidence_hi = static_cast<double>(b + 1) / static_cast<double>(count);
  }
  for (std::size_t i : sorted_order(samples)) {
    auto index = static_cast<std::size_t>(samples[i].confidence * static_cast<double>(count));
    buckets[std::min(index, count - 1)].indices.push_back(i);
  }
  std::erase_if(buckets, [](const BinMembers& b) { return b.indices.empty(); });
  return buckets;
}

std::vector<CalibrationBin> summarize(std::span<const Sample> samples,
                                      const std::vector<BinMembers>& groups) {
  std::vector<CalibrationBin> bins;
  bins.reserve(groups.size());
  for (const auto& group : groups) {
    double conf = 0.0;
    double acc = 0.0;
    for (std::size_t i : group.indices) {
      conf += samples[i].confidence;
      acc += samples[i].correct ? 1.0 : 0.0;
    }
    const auto n = static_cast<double>(group.indices.size());
    CalibrationBin bin;
    bin.sample_count = group.indices.size();
    bin.confidence_lo = group.confidence_lo;
    bin.confidence_hi = group.confidence_hi;
    bin.mean_confidence = std::clamp(conf / n, group.confidence_lo, group.confidence_hi);
    bin.mean_accuracy = acc / n;
    bins.push_back(bin);
  }
  return bins;
}

}  // namespace

std::string_view to_string(BinningStrategy strategy) {
  return strategy == BinningStrategy::kAdaptive ? "adaptive" : "fixed";
}

BinningStrategy parse_binning_strategy(std::string_view name) {
  if (name == "adaptive") return BinningStrategy::kAdaptive;
  if (name == "fixed") return BinningStrategy::kFixed;
  throw ParseError("unknown binning strategy '" + std::string(name) + "'", 0);
}

std::string_view to_string(ReportLevel level) {
  return level == ReportLevel::kToken ? "token" : "sequence";
}

double BinningConfig::z_score() const {
  validate();
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 1.0 - alpha / 2.0);
}

std::size_t BinningConfig::adaptive_bin_size() const {
  const double ratio = z_score() / epsilon;
  return static_cast<std::size_t>(std::ceil(0.25 * ratio * ratio));
}

void BinningConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("binning alpha must lie in (0, 1)");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("binning epsilon must be positive");
  if (strategy == BinningStrategy::kFixed && fixed_bin_count < 1)
    throw Error("fixed binning needs at least one bin");
}

std::vector<BinMembers> partition_samples(std::span<const Sample> samples,
                                          const BinningConfig& config) {
  return config.strategy == BinningStrategy::kAdaptive ? adaptive_partition(samples, config)
                                                       : fixed_partition(samples, config);
}

std::vector<CalibrationBin> adaptive_bins(std::span<const Sample> samples,
                                          const BinningConfig& config) {
  return summarize(samples, adaptive_partition(samples, config));
}

std::vector<CalibrationBin> fixed_bins(std::span<const Sample> samples,
                                       const BinningConfig& config) {
  return summarize(samples, fixed_partition(samples, config));
}

std::vector<CalibrationBin> bin_samples(std::span<const Sample> samples,
                                        const BinningConfig& config) {
  return summarize(samples, partition_samples(samples, config));
}

double ece(std::span<const CalibrationBin> bins, std::size_t total_samples) {
  if (total_samples == 0) throw Error("ECE is undefined for zero samples");
  double sum = 0.0;
  for (const auto& bin : bins)
    sum += static_cast<double>(bin.sample_count) / static_cast<double>(total_samples) *
           std::abs(bin.mean_accuracy - bin.mean_confidence);
  return 100.0 * sum;
}

CalibrationReport build_report(std::span<const Sample> samples, ReportLevel level,
                               const BinningConfig& binning) {
  CalibrationReport report;
  report.level = level;
  report.binning = binning;
  report.bins = bin_samples(samples, binning);
  report.total_samples = samples.size();
  std::size_t correct = 0;
  for (const auto& s : samples) correct += s.correct ? 1 : 0;
  report.overall_accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  report.ece = ece(report.bins, report.total_samples);
  return report;
}

bool exact_match(std::string_view predicted, std::string_view gold, ProgramDialect dialect,
                 const NormalizationConfig& normalization) {
  const auto pred_tokens = tokenize_program(predicted, dialect);
  const auto gold_tokens = tokenize_program(gold, dialect);
  return normalize(pred_tokens, normalization) == normalize(gold_tokens, normalization);
}

bool accuracy_at_k(const PredictionRecord& record, std::size_t k, ProgramDialect dialect,
                   const NormalizationConfig& normalization) {
  if (k < 1) throw Error("accuracy@k needs k >= 1");
  if (record.beam.empty())
    throw ValidationError("example '" + record.example_id + "' has an empty beam");
  const std::size_t limit = std::min(k, record.beam.size());
  for (std::size_t i = 0; i < limit; ++i)
    if (exact_match(record.beam[i], record.gold_program, dialect, normalization)) return true;
  return false;
}

double token_confidence(const TokenRecord& token, Aggregation method) {
  return aggregate_confidence(std::span<const SubwordRecord>(token.subwords), method);
}

double sequence_confidence(const PredictionRecord& record, Aggregation method) {
  if (record.predicted_token_records.empty())
    throw ValidationError("example '" + record.example_id +
                          "' is missing predicted-side token confidences "
                          "(predicted_token_records)");
  std::vector<double> per_token;
  per_token.reserve(record.predicted_token_records.size());
  for (const auto& t : record.predicted_token_records)
    per_token.push_back(token_confidence(t, method));
  return aggregate_confidence(per_token, method);
}

std::vector<Sample> token_samples(std::span<const PredictionRecord> records, Aggregation method) {
  std::vector<Sample> samples;
  for (const auto& rec : records) {
    if (rec.token_records.empty())
      throw ValidationError("example '" + rec.example_id + "' has no token_records");
    for (std::size_t i = 0; i < rec.token_records.size(); ++i) {
      const auto& t = rec.token_records[i];
      samples.push_back({token_confidence(t, method), t.match, rec.example_id, i, t.gold_token});
    }
  }
  return samples;
}

std::vector<Sample> sequence_samples(std::span<const PredictionRecord> records,
                                     Aggregation method, const ScoringOptions& scoring) {
  std::vector<Sample> samples;
  samples.reserve(records.size());
  for (const auto& rec : records) {
    const bool correct = exact_match(rec.predicted_program, rec.gold_program, scoring.dialect,
                                     scoring.normalization);
    samples.push_back({sequence_confidence(rec, method), correct, rec.example_id, 0, {}});
  }
  return samples;
}

CalibrationReport token_level_report(std::span<const PredictionRecord> records,
                                     Aggregation method, const BinningConfig& binning) {
  const auto samples = token_samples(records, method);
  return build_report(samples, ReportLevel::kToken, binning);
}

CalibrationReport sequence_level_report(std::span<const PredictionRecord> records,
                                        Aggregation method, const BinningConfig& binning,
                                        const ScoringOptions& scoring) {
  const auto samples = sequence_samples(records, method, scoring);
  return build_report(samples, ReportLevel::kSequence, binning);
}

CalibrationReport accuracy_at_k_report(std::span<const PredictionRecord> records, std::size_t k,
                                       Aggregation method, const BinningConfig& binning,
                                       const ScoringOptions& scoring) {
  std::vector<Sample> samples;
  samples.reserve(records.size());
  for (const auto& rec : records)
    samples.push_back({sequence_confidence(rec, method),
                       accuracy_at_k(rec, k, scoring.dialect, scoring.normalization),
                       rec.example_id, 0, {}});
  return build_report(samples, ReportLevel::kSequence, binning);
}

CalibrationReport execution_report(std::span<const PredictionRecord> records, Aggregation method,
                                   const BinningConfig& binning) {
  std::vector<std::string> missing;
  for (const auto& rec : records)
    if (!rec.exec_correct) missing.push_back(rec.example_id);
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i)
      list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ... (" + std::to_string(missing.size()) + " total)";
    throw ValidationError("exec_correct missing for: " + list);
  }
  std::vector<Sample> samples;
  samples.reserve(records.size());
  for (const auto& rec : records)
    samples.push_back({sequence_confidence(rec, method), *rec.exec_correct, rec.example_id, 0, {}});
  return build_report(samples, ReportLevel::kSequence, binning);
}

}  // namespace calibkit
